//! Bit-exact weight serialization. Layout: magic "BSEG", version as 4-byte
//! little-endian unsigned, 8-byte little-endian header length, a JSON header
//! (embedded config plus per-parameter name/dtype/shape/offset), then raw
//! little-endian f32 blobs in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{for_each_param, ParamKind, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::{from_f64, to_f64, Scalar};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"BSEG";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<CheckpointParam>,
}

#[derive(Serialize, Deserialize)]
struct HeaderParam {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    params: Vec<HeaderParam>,
}

impl Checkpoint {
    pub fn from_params<S: Scalar>(config: ModelConfig, params: &ParamSet<S>) -> Self {
        Checkpoint {
            version: VERSION,
            config,
            params: params
                .entries()
                .iter()
                .map(|p| CheckpointParam {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    data: p.tensor.data().iter().map(|&v| to_f64(v) as f32).collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds a typed parameter set, verifying names and shapes against
    /// the embedded config's parameter table.
    pub fn to_param_set<S: Scalar>(&self) -> Result<ParamSet<S>> {
        self.config.validate()?;
        let mut expected: Vec<(String, ParamKind, Vec<usize>)> = Vec::new();
        for_each_param(&self.config, |name, kind, shape| {
            expected.push((name, kind, shape));
        });
        let mut by_name: std::collections::HashMap<&str, &CheckpointParam> =
            self.params.iter().map(|p| (p.name.as_str(), p)).collect();
        if by_name.len() != self.params.len() {
            return Err(Error::Checkpoint("duplicate parameter names".into()));
        }
        let mut set = ParamSet::new();
        for (name, kind, shape) in &expected {
            let p = by_name.remove(name.as_str()).ok_or_else(|| {
                Error::Checkpoint(format!("missing parameter {}", name))
            })?;
            if &p.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, config wants {:?}",
                    name, p.shape, shape
                )));
            }
            let tensor = Tensor::new(
                p.shape.clone(),
                p.data.iter().map(|&v| from_f64(v as f64)).collect(),
            )?;
            set.push(name.clone(), *kind, tensor)?;
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Checkpoint(format!(
                "unexpected parameter {} not in the config's table",
                extra
            )));
        }
        Ok(set)
    }

    /// Verifies this checkpoint would load into a model of `cfg`, reporting
    /// the first offending parameter otherwise.
    pub fn check_matches_config(&self, cfg: &ModelConfig) -> Result<()> {
        let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
        for_each_param(cfg, |name, _, shape| expected.push((name, shape)));
        let by_name: std::collections::HashMap<&str, &CheckpointParam> =
            self.params.iter().map(|p| (p.name.as_str(), p)).collect();
        for (name, shape) in &expected {
            match by_name.get(name.as_str()) {
                None => {
                    return Err(Error::Checkpoint(format!(
                        "checkpoint lacks parameter {} required by the target config",
                        name
                    )))
                }
                Some(p) if &p.shape != shape => {
                    return Err(Error::Checkpoint(format!(
                        "parameter {} has shape {:?}, target config wants {:?}",
                        name, p.shape, shape
                    )))
                }
                _ => {}
            }
        }
        if self.params.len() != expected.len() {
            let expected_names: std::collections::HashSet<&str> =
                expected.iter().map(|(n, _)| n.as_str()).collect();
            if let Some(extra) = self
                .params
                .iter()
                .find(|p| !expected_names.contains(p.name.as_str()))
            {
                return Err(Error::Checkpoint(format!(
                    "checkpoint carries parameter {} unknown to the target config",
                    extra.name
                )));
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    for p in &ckpt.params {
        if p.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!(
                "refusing to save non-finite parameter {}",
                p.name
            )));
        }
        if p.data.len() != p.shape.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!(
                "parameter {} data disagrees with its shape",
                p.name
            )));
        }
    }
    let mut offset = 0u64;
    let header = Header {
        config: ckpt.config.clone(),
        params: ckpt
            .params
            .iter()
            .map(|p| {
                let hp = HeaderParam {
                    name: p.name.clone(),
                    dtype: "f32".into(),
                    shape: p.shape.clone(),
                    offset,
                };
                offset += (p.data.len() * 4) as u64;
                hp
            })
            .collect(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(format!("header: {}", e)))?;
    let mut bytes = Vec::with_capacity(16 + header_json.len() + offset as usize);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&ckpt.version.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for p in &ckpt.params {
        for v in &p.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::format(path, msg.to_string());
    if bytes.len() < 16 {
        return Err(fail("truncated before the header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail("bad magic bytes, not a checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!(
            "unsupported version {} (supported: {})",
            version, VERSION
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() < 16 + header_len {
        return Err(fail("truncated inside the header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])
        .map_err(|e| fail(&format!("header does not parse: {}", e)))?;
    let blob = &bytes[16 + header_len..];
    let mut params = Vec::with_capacity(header.params.len());
    let mut expected_end = 0usize;
    for hp in &header.params {
        if hp.dtype != "f32" {
            return Err(fail(&format!("parameter {} has dtype {}", hp.name, hp.dtype)));
        }
        let count: usize = hp.shape.iter().product();
        let start = hp.offset as usize;
        let end = start
            .checked_add(count * 4)
            .ok_or_else(|| fail("parameter offsets overflow"))?;
        if end > blob.len() {
            return Err(fail(&format!(
                "truncated: parameter {} wants bytes {}..{} of a {}-byte blob",
                hp.name,
                start,
                end,
                blob.len()
            )));
        }
        let data: Vec<f32> = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.push(CheckpointParam {
            name: hp.name.clone(),
            shape: hp.shape.clone(),
            data,
        });
        expected_end = expected_end.max(end);
    }
    if expected_end != blob.len() {
        return Err(fail(&format!(
            "blob has {} bytes, header accounts for {}",
            blob.len(),
            expected_end
        )));
    }
    Ok(Checkpoint {
        version,
        config: header.config,
        params,
    })
}
