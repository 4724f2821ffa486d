//! Sample records and split assignment.
//!
//! A [`SampleRecord`] describes one source image/mask pair before tiling.
//! Records are the unit of split assignment: every patch cut from a source
//! inherits its record's split, so patches of one scene never straddle
//! train/test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corpus split. Serialized lowercase everywhere (manifest, store layout).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

/// Source dataset tag. The set is closed: adapters declare one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    Mapai,
    Inria,
    Whu,
    Floodnet,
    Synthetic,
}

impl DatasetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Mapai => "mapai",
            DatasetTag::Inria => "inria",
            DatasetTag::Whu => "whu",
            DatasetTag::Floodnet => "floodnet",
            DatasetTag::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mapai" => Ok(DatasetTag::Mapai),
            "inria" => Ok(DatasetTag::Inria),
            "whu" => Ok(DatasetTag::Whu),
            "floodnet" => Ok(DatasetTag::Floodnet),
            "synthetic" => Ok(DatasetTag::Synthetic),
            other => Err(Error::Data(format!("unknown dataset tag {other:?}"))),
        }
    }
}

/// One source image/mask pair. `id` is `<dataset>_<stem>`, globally unique
/// within a manifest. `width`/`height` are the dimensions the source was
/// tiled at (after any adapter rescale).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub dataset: DatasetTag,
    pub image_uri: String,
    pub mask_uri: String,
    pub width: usize,
    pub height: usize,
    pub split: Split,
}

/// FNV-1a over the seed then the id bytes. Stable across platforms, so split
/// assignment is a pure function of (seed, id).
fn record_hash(seed: u64, id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(id.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Seeded 80/10/10 assignment used when a dataset's directory layout does not
/// carry its own splits.
pub fn assign_split(seed: u64, id: &str) -> Split {
    match record_hash(seed, id) % 10 {
        0..=7 => Split::Train,
        8 => Split::Val,
        _ => Split::Test,
    }
}
