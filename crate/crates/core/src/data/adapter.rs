//! Dataset adapters: directory scanning and class mapping.
//!
//! Every corpus is consumed through the same generic layout, one image
//! directory and one mask directory with matching file stems, optionally
//! nested one level under `train/`, `val/`, `test/` when the dataset ships
//! its own splits. What varies per dataset lives in a small TOML file: the
//! tag, the directory names, a rescale factor, and the label-to-binary class
//! map. Multi-class label schemes (e.g. flood-damage grids where two of the
//! labels are building classes) reduce to {0,1} here, before tiling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::image_buf::LabelBuf;
use crate::data::record::{assign_split, DatasetTag, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::metrics::Mask;

/// Total label map for one dataset. `map` sends every raw label value the
/// dataset may emit to 0 (background) or 1 (building).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMapping {
    pub dataset: DatasetTag,
    pub map: BTreeMap<u8, u8>,
    /// Strict mode rejects labels outside `map`; lenient mode sends them to
    /// background and counts them.
    pub strict: bool,
}

impl ClassMapping {
    pub fn new(dataset: DatasetTag, map: BTreeMap<u8, u8>, strict: bool) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Config("class map is empty".into()));
        }
        if let Some((k, v)) = map.iter().find(|(_, v)| **v > 1) {
            return Err(Error::Config(format!(
                "class map sends label {k} to {v}; targets must be 0 or 1"
            )));
        }
        if !map.values().any(|v| *v == 1) {
            return Err(Error::Config("class map never produces the building class".into()));
        }
        Ok(Self { dataset, map, strict })
    }

    /// Identity {0,1} map for datasets whose masks are already binary.
    pub fn binary(dataset: DatasetTag) -> Self {
        Self { dataset, map: BTreeMap::from([(0, 0), (1, 1)]), strict: true }
    }
}

/// Outcome of [`map_classes_binary`]: the binary mask plus how many pixels
/// carried labels outside the map (nonzero only in lenient mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedMask {
    pub mask: Mask,
    pub unmapped_pixels: usize,
}

/// Reduce a raw label grid to the binary building mask.
pub fn map_classes_binary(raw: &LabelBuf, mapping: &ClassMapping) -> Result<MappedMask> {
    let mut unmapped = 0usize;
    let mut data = vec![0u8; raw.width() * raw.height()];
    for (out, label) in data.iter_mut().zip(raw.data()) {
        match mapping.map.get(label) {
            Some(v) => *out = *v,
            None if mapping.strict => {
                return Err(Error::Data(format!(
                    "label {label} has no class mapping for dataset {}",
                    mapping.dataset
                )));
            }
            None => unmapped += 1,
        }
    }
    Ok(MappedMask { mask: Mask::new(raw.width(), raw.height(), data)?, unmapped_pixels: unmapped })
}

/// Per-dataset adapter declaration, loaded from a TOML file next to the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    pub dataset: DatasetTag,
    #[serde(default = "default_images_dir")]
    pub images_dir: String,
    #[serde(default = "default_masks_dir")]
    pub masks_dir: String,
    #[serde(default = "default_ext")]
    pub image_ext: String,
    #[serde(default = "default_ext")]
    pub mask_ext: String,
    /// Linear scale applied to both image and mask before tiling; 1.0 is a
    /// no-op. Images are resampled bilinearly, masks by nearest-neighbour.
    #[serde(default = "default_rescale")]
    pub rescale: f64,
    #[serde(default = "default_true")]
    pub strict: bool,
    /// Raw label value -> {0,1}. TOML table keys are strings; they must parse
    /// as u8.
    pub class_map: BTreeMap<String, u8>,
}

fn default_images_dir() -> String {
    "images".into()
}

fn default_masks_dir() -> String {
    "masks".into()
}

fn default_ext() -> String {
    "png".into()
}

fn default_rescale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl AdapterConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: AdapterConfig =
            toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("adapter serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.images_dir.is_empty() || self.masks_dir.is_empty() {
            return Err(Error::Config("adapter directories must be nonempty".into()));
        }
        if !(self.rescale.is_finite() && self.rescale > 0.0) {
            return Err(Error::Config(format!("rescale factor {} out of range", self.rescale)));
        }
        self.class_mapping()?;
        Ok(())
    }

    pub fn class_mapping(&self) -> Result<ClassMapping> {
        let mut map = BTreeMap::new();
        for (k, v) in &self.class_map {
            let label: u8 = k
                .parse()
                .map_err(|_| Error::Config(format!("class map key {k:?} is not a u8 label")))?;
            map.insert(label, *v);
        }
        ClassMapping::new(self.dataset, map, self.strict)
    }
}

/// Everything `ingest` found: records sorted by id, plus human-readable
/// warnings for orphaned files.
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub records: Vec<SampleRecord>,
    pub warnings: Vec<String>,
}

fn list_stems(dir: &Path, ext: &str) -> Result<BTreeSet<String>> {
    let mut stems = BTreeSet::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            stems.insert(stem.to_string());
        }
    }
    Ok(stems)
}

fn png_dims(path: &Path) -> Result<(usize, usize)> {
    let (w, h) =
        image::image_dimensions(path).map_err(|e| Error::format(path, format!("header: {e}")))?;
    Ok((w as usize, h as usize))
}

fn scan_pair_dir(
    images: &Path,
    masks: &Path,
    cfg: &AdapterConfig,
    split_for: &mut dyn FnMut(&str) -> Split,
    records: &mut Vec<SampleRecord>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let image_stems = list_stems(images, &cfg.image_ext)?;
    let mask_stems = list_stems(masks, &cfg.mask_ext)?;
    for stem in image_stems.difference(&mask_stems) {
        warnings.push(format!("{}: image {stem:?} has no mask, skipped", cfg.dataset));
    }
    for stem in mask_stems.difference(&image_stems) {
        warnings.push(format!("{}: mask {stem:?} has no image, skipped", cfg.dataset));
    }
    for stem in image_stems.intersection(&mask_stems) {
        let image_path = images.join(format!("{stem}.{}", cfg.image_ext));
        let mask_path = masks.join(format!("{stem}.{}", cfg.mask_ext));
        let (width, height) = png_dims(&image_path)?;
        let id = format!("{}_{stem}", cfg.dataset);
        let split = split_for(&id);
        records.push(SampleRecord {
            id,
            dataset: cfg.dataset,
            image_uri: image_path.display().to_string(),
            mask_uri: mask_path.display().to_string(),
            width,
            height,
            split,
        });
    }
    Ok(())
}

/// Enumerate one dataset root into records. Splits come from the directory
/// structure when `images/train` (etc.) exists, otherwise from a seeded
/// 80/10/10 hash of the record id. Ordering is lexicographic by id, so the
/// same root always yields the same records.
pub fn ingest(root: &Path, cfg: &AdapterConfig, split_seed: u64) -> Result<IngestOutcome> {
    cfg.validate()?;
    if !root.is_dir() {
        return Err(Error::Data(format!("dataset root {} does not exist", root.display())));
    }
    let images_root = root.join(&cfg.images_dir);
    let masks_root = root.join(&cfg.masks_dir);
    if !images_root.is_dir() {
        return Err(Error::Data(format!("missing image directory {}", images_root.display())));
    }
    if !masks_root.is_dir() {
        return Err(Error::Data(format!("missing mask directory {}", masks_root.display())));
    }

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let structured: Vec<Split> =
        Split::ALL.into_iter().filter(|s| images_root.join(s.as_str()).is_dir()).collect();

    if structured.is_empty() {
        let mut split_for = |id: &str| assign_split(split_seed, id);
        scan_pair_dir(&images_root, &masks_root, cfg, &mut split_for, &mut records, &mut warnings)?;
    } else {
        for split in structured {
            let masks_dir = masks_root.join(split.as_str());
            if !masks_dir.is_dir() {
                return Err(Error::Data(format!(
                    "split directory {} has no mask counterpart",
                    images_root.join(split.as_str()).display()
                )));
            }
            let mut split_for = |_: &str| split;
            scan_pair_dir(
                &images_root.join(split.as_str()),
                &masks_dir,
                cfg,
                &mut split_for,
                &mut records,
                &mut warnings,
            )?;
        }
    }

    if records.is_empty() {
        return Err(Error::Data(format!(
            "no image/mask pairs under {} (images: {}, masks: {})",
            root.display(),
            cfg.images_dir,
            cfg.masks_dir
        )));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Data(format!("duplicate record id {:?}", w[0].id)));
    }
    Ok(IngestOutcome { records, warnings })
}

/// Resolve a record's source paths against the working directory they were
/// ingested from.
pub fn record_paths(record: &SampleRecord) -> (PathBuf, PathBuf) {
    (PathBuf::from(&record.image_uri), PathBuf::from(&record.mask_uri))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_adapter() -> AdapterConfig {
        AdapterConfig {
            dataset: DatasetTag::Synthetic,
            images_dir: "images".into(),
            masks_dir: "masks".into(),
            image_ext: "png".into(),
            mask_ext: "png".into(),
            rescale: 1.0,
            strict: true,
            class_map: BTreeMap::from([("0".into(), 0), ("255".into(), 1)]),
        }
    }

    fn write_pair(root: &Path, cfg: &AdapterConfig, stem: &str, w: usize, h: usize) {
        use crate::data::image_buf::ImageBuf;
        let images = root.join(&cfg.images_dir);
        let masks = root.join(&cfg.masks_dir);
        std::fs::create_dir_all(&images).unwrap();
        std::fs::create_dir_all(&masks).unwrap();
        ImageBuf::zeros(w, h).save_png(&images.join(format!("{stem}.png"))).unwrap();
        LabelBuf::new(w, h, vec![0; w * h])
            .unwrap()
            .save_png(&masks.join(format!("{stem}.png")))
            .unwrap();
    }

    fn temp_root(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("buildseg_adapter_tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn identity_mapping_keeps_binary_mask() {
        let raw = LabelBuf::new(3, 2, vec![0, 1, 1, 0, 0, 1]).unwrap();
        let mapping = ClassMapping::binary(DatasetTag::Mapai);
        let out = map_classes_binary(&raw, &mapping).unwrap();
        assert_eq!(out.mask.data(), raw.data());
        assert_eq!(out.unmapped_pixels, 0);
    }

    #[test]
    fn multi_label_grid_maps_both_building_classes_to_one() {
        // Label ids mimic a flood-damage scheme: 3 and 4 are the two building
        // classes, everything else is background.
        let map = BTreeMap::from([
            (0u8, 0u8),
            (1, 0),
            (2, 0),
            (3, 1),
            (4, 1),
            (5, 0),
            (6, 0),
            (7, 0),
            (8, 0),
        ]);
        let mapping = ClassMapping::new(DatasetTag::Floodnet, map, true).unwrap();
        let raw = LabelBuf::new(4, 1, vec![3, 4, 3, 4]).unwrap();
        let out = map_classes_binary(&raw, &mapping).unwrap();
        assert_eq!(out.mask.data(), &[1, 1, 1, 1]);

        let raw_bg = LabelBuf::new(4, 1, vec![0, 2, 5, 8]).unwrap();
        let out_bg = map_classes_binary(&raw_bg, &mapping).unwrap();
        assert_eq!(out_bg.mask.data(), &[0, 0, 0, 0]);
    }

    #[test]
    fn strict_mode_rejects_unknown_labels() {
        let raw = LabelBuf::new(2, 1, vec![0, 77]).unwrap();
        let mapping = ClassMapping::binary(DatasetTag::Whu);
        let err = map_classes_binary(&raw, &mapping).unwrap_err();
        assert!(err.to_string().contains("77"), "{err}");
    }

    #[test]
    fn lenient_mode_counts_unknown_labels() {
        let raw = LabelBuf::new(3, 1, vec![1, 77, 99]).unwrap();
        let mapping =
            ClassMapping::new(DatasetTag::Whu, BTreeMap::from([(0, 0), (1, 1)]), false).unwrap();
        let out = map_classes_binary(&raw, &mapping).unwrap();
        assert_eq!(out.mask.data(), &[1, 0, 0]);
        assert_eq!(out.unmapped_pixels, 2);
    }

    #[test]
    fn mapping_must_produce_building_class() {
        let err = ClassMapping::new(DatasetTag::Inria, BTreeMap::from([(0, 0)]), true).unwrap_err();
        assert!(err.to_string().contains("building"), "{err}");
    }

    #[test]
    fn adapter_toml_round_trip() {
        let dir = temp_root("toml_rt");
        let cfg = synthetic_adapter();
        let path = dir.join("adapter.toml");
        cfg.save(&path).unwrap();
        let back = AdapterConfig::load(&path).unwrap();
        assert_eq!(back.dataset, cfg.dataset);
        assert_eq!(back.class_map, cfg.class_map);
        assert_eq!(back.rescale, cfg.rescale);
    }

    #[test]
    fn ingest_pairs_and_sorts_by_id() {
        let root = temp_root("ingest_sorted");
        let cfg = synthetic_adapter();
        for stem in ["b", "a", "c"] {
            write_pair(&root, &cfg, stem, 8, 8);
        }
        let out = ingest(&root, &cfg, 7).unwrap();
        let ids: Vec<&str> = out.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["synthetic_a", "synthetic_b", "synthetic_c"]);
        assert!(out.warnings.is_empty());
        assert_eq!(out.records[0].width, 8);

        let again = ingest(&root, &cfg, 7).unwrap();
        assert_eq!(again.records, out.records);
    }

    #[test]
    fn orphan_image_is_skipped_with_warning() {
        let root = temp_root("ingest_orphan");
        let cfg = synthetic_adapter();
        write_pair(&root, &cfg, "ok_0", 8, 8);
        write_pair(&root, &cfg, "ok_1", 8, 8);
        // Orphan image without a mask.
        crate::data::image_buf::ImageBuf::zeros(8, 8)
            .save_png(&root.join("images/lost.png"))
            .unwrap();
        let out = ingest(&root, &cfg, 7).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("lost"), "{:?}", out.warnings);
    }

    #[test]
    fn empty_root_is_an_error() {
        let root = temp_root("ingest_empty");
        let cfg = synthetic_adapter();
        std::fs::create_dir_all(root.join("images")).unwrap();
        std::fs::create_dir_all(root.join("masks")).unwrap();
        assert!(ingest(&root, &cfg, 7).is_err());
        assert!(ingest(&root.join("nope"), &cfg, 7).is_err());
    }

    #[test]
    fn structured_splits_are_honored() {
        let root = temp_root("ingest_structured");
        let mut cfg = synthetic_adapter();
        cfg.dataset = DatasetTag::Mapai;
        cfg.class_map = BTreeMap::from([("0".into(), 0), ("255".into(), 1)]);
        for (split, stem) in [("train", "t0"), ("train", "t1"), ("val", "v0"), ("test", "s0")] {
            let images = root.join("images").join(split);
            let masks = root.join("masks").join(split);
            std::fs::create_dir_all(&images).unwrap();
            std::fs::create_dir_all(&masks).unwrap();
            crate::data::image_buf::ImageBuf::zeros(8, 8)
                .save_png(&images.join(format!("{stem}.png")))
                .unwrap();
            LabelBuf::new(8, 8, vec![0; 64])
                .unwrap()
                .save_png(&masks.join(format!("{stem}.png")))
                .unwrap();
        }
        let out = ingest(&root, &cfg, 7).unwrap();
        let by_split: Vec<(String, Split)> =
            out.records.iter().map(|r| (r.id.clone(), r.split)).collect();
        assert_eq!(
            by_split,
            vec![
                ("mapai_s0".to_string(), Split::Test),
                ("mapai_t0".to_string(), Split::Train),
                ("mapai_t1".to_string(), Split::Train),
                ("mapai_v0".to_string(), Split::Val),
            ]
        );
    }
}
