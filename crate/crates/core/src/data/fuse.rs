//! End-to-end corpus fusion: heterogeneous dataset roots in, one uniform
//! patch store out.
//!
//! Each source contributes records through its adapter; every record's mask
//! is reduced to binary, optionally rescaled (bilinear image,
//! nearest-neighbour mask), tiled to 256x256, and written into a single
//! store. Records keep their dataset tag, so training can report per-dataset
//! mix and evaluation can report per-dataset rows.

use std::path::{Path, PathBuf};

use crate::data::adapter::{ingest, map_classes_binary, record_paths, AdapterConfig};
use crate::data::image_buf::{ImageBuf, LabelBuf};
use crate::data::store::{write_patch_store, Manifest, StoreItem};
use crate::data::tile::tile_to_patches;
use crate::error::{Error, Result};
use crate::metrics::Mask;

/// One dataset root plus the adapter describing how to read it.
#[derive(Debug, Clone)]
pub struct CorpusSource {
    pub root: PathBuf,
    pub adapter: AdapterConfig,
}

impl CorpusSource {
    /// Load `<root>/adapter.toml`, the convention every corpus follows.
    pub fn discover(root: &Path) -> Result<Self> {
        let adapter = AdapterConfig::load(&root.join("adapter.toml"))?;
        Ok(Self { root: root.to_path_buf(), adapter })
    }
}

#[derive(Debug)]
pub struct FuseOutcome {
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

fn rescaled_dims(w: usize, h: usize, factor: f64) -> (usize, usize) {
    let scale = |v: usize| ((v as f64 * factor).round() as usize).max(1);
    (scale(w), scale(h))
}

/// Fuse one or more sources into a patch store at `out_root`.
pub fn fuse_corpora(
    sources: &[CorpusSource],
    out_root: &Path,
    split_seed: u64,
) -> Result<FuseOutcome> {
    if sources.is_empty() {
        return Err(Error::Data("fuse needs at least one corpus source".into()));
    }
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for src in sources {
        let outcome = ingest(&src.root, &src.adapter, split_seed)?;
        warnings.extend(outcome.warnings);
        let mapping = src.adapter.class_mapping()?;
        for mut record in outcome.records {
            let (image_path, mask_path) = record_paths(&record);
            let image = ImageBuf::load_png(&image_path)?;
            let raw = LabelBuf::load_png(&mask_path)?;
            if raw.width() != image.width() || raw.height() != image.height() {
                return Err(Error::Data(format!(
                    "record {}: image is {}x{} but mask is {}x{}",
                    record.id,
                    image.width(),
                    image.height(),
                    raw.width(),
                    raw.height()
                )));
            }
            let mapped = map_classes_binary(&raw, &mapping)?;
            if mapped.unmapped_pixels > 0 {
                warnings.push(format!(
                    "{}: {} pixels with unmapped labels sent to background",
                    record.id, mapped.unmapped_pixels
                ));
            }
            let (image, mask) = if (src.adapter.rescale - 1.0).abs() > 1e-12 {
                let (w, h) = rescaled_dims(image.width(), image.height(), src.adapter.rescale);
                let image = image.rescale_bilinear(w, h)?;
                let as_labels =
                    LabelBuf::new(mapped.mask.width(), mapped.mask.height(), mapped.mask.data().to_vec())?;
                let mask = Mask::new(w, h, as_labels.rescale_nearest(w, h)?.data().to_vec())?;
                (image, mask)
            } else {
                (image, mapped.mask)
            };
            record.width = image.width();
            record.height = image.height();
            let patches = tile_to_patches(&record.id, &image, &mask)?;
            items.push(StoreItem { record, patches });
        }
    }
    let manifest = write_patch_store(out_root, &items)?;
    Ok(FuseOutcome { manifest, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::record::{DatasetTag, Split};
    use crate::data::store::PatchStore;
    use crate::data::synth::{generate_synthetic, SynthDomain};
    use std::collections::BTreeMap;

    fn temp_root(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("buildseg_fuse_tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn synthetic_corpus_fuses_into_verified_store() {
        let base = temp_root("synth_roundtrip");
        let corpus = base.join("corpus");
        generate_synthetic(&corpus, 11, 3, SynthDomain::A).unwrap();
        let source = CorpusSource::discover(&corpus).unwrap();
        let out = base.join("store");
        let fused = fuse_corpora(&[source], &out, 7).unwrap();
        // 512x512 scenes tile to 4 patches each.
        assert_eq!(fused.manifest.len(), 12);
        assert_eq!(fused.manifest.stats.records, 3);
        assert!(fused.warnings.is_empty(), "{:?}", fused.warnings);
        let store = PatchStore::open(&out).unwrap();
        store.verify().unwrap();
        assert!(store.entries().iter().all(|e| e.dataset == DatasetTag::Synthetic));
        // Scene-level splits: all four patches of a record share one split.
        for chunk in store.entries().chunks(4) {
            assert!(chunk.iter().all(|e| e.split == chunk[0].split));
        }
    }

    #[test]
    fn refusing_when_sources_are_empty() {
        assert!(fuse_corpora(&[], &temp_root("none"), 7).is_err());
    }

    #[test]
    fn refuse_is_deterministic_across_output_roots() {
        let base = temp_root("deterministic");
        let corpus = base.join("corpus");
        generate_synthetic(&corpus, 3, 2, SynthDomain::B).unwrap();
        let source = CorpusSource::discover(&corpus).unwrap();
        fuse_corpora(std::slice::from_ref(&source), &base.join("out1"), 7).unwrap();
        fuse_corpora(std::slice::from_ref(&source), &base.join("out2"), 7).unwrap();
        let m1 = std::fs::read(base.join("out1/manifest.jsonl")).unwrap();
        let m2 = std::fs::read(base.join("out2/manifest.jsonl")).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn two_domains_fuse_with_distinct_ids() {
        let base = temp_root("two_domains");
        let ca = base.join("a");
        let cb = base.join("b");
        generate_synthetic(&ca, 5, 2, SynthDomain::A).unwrap();
        generate_synthetic(&cb, 5, 2, SynthDomain::B).unwrap();
        let sources =
            vec![CorpusSource::discover(&ca).unwrap(), CorpusSource::discover(&cb).unwrap()];
        let fused = fuse_corpora(&sources, &base.join("store"), 7).unwrap();
        assert_eq!(fused.manifest.len(), 16);
        let ids: std::collections::BTreeSet<_> =
            fused.manifest.entries.iter().map(|e| e.id.clone()).collect();
        assert!(ids.contains("synthetic_scene_a_0000"));
        assert!(ids.contains("synthetic_scene_b_0001"));
    }

    #[test]
    fn rescale_adapter_changes_tiling_dims() {
        let base = temp_root("rescale");
        let corpus = base.join("corpus");
        let images = corpus.join("images");
        let masks = corpus.join("masks");
        std::fs::create_dir_all(&images).unwrap();
        std::fs::create_dir_all(&masks).unwrap();
        let mut img = ImageBuf::zeros(100, 100);
        for y in 0..100 {
            for x in 0..100 {
                img.set_pixel(x, y, [(x * 2) as u8, (y * 2) as u8, 90]);
            }
        }
        img.save_png(&images.join("s.png")).unwrap();
        let labels = LabelBuf::new(
            100,
            100,
            (0..10000).map(|i| if i % 100 < 30 { 255 } else { 0 }).collect(),
        )
        .unwrap();
        labels.save_png(&masks.join("s.png")).unwrap();
        let adapter = AdapterConfig {
            dataset: DatasetTag::Whu,
            images_dir: "images".into(),
            masks_dir: "masks".into(),
            image_ext: "png".into(),
            mask_ext: "png".into(),
            rescale: 2.56,
            strict: true,
            class_map: BTreeMap::from([("0".into(), 0), ("255".into(), 1)]),
        };
        let fused = fuse_corpora(
            &[CorpusSource { root: corpus, adapter }],
            &base.join("store"),
            7,
        )
        .unwrap();
        // 100 * 2.56 rounds to 256: exactly one fully valid patch.
        assert_eq!(fused.manifest.len(), 1);
        let e = &fused.manifest.entries[0];
        assert_eq!((e.width, e.height), (256, 256));
        assert_eq!(e.valid.area(), 256 * 256);
        let store = PatchStore::open(&base.join("store")).unwrap();
        let patch = store.load_entry(e).unwrap();
        // Nearest-neighbour keeps the mask binary and roughly 30% building.
        let frac = patch.building_pixels() as f64 / (256.0 * 256.0);
        assert!((frac - 0.3).abs() < 0.02, "{frac}");
    }

    #[test]
    fn split_assignment_covers_all_three_with_enough_scenes() {
        let base = temp_root("splits");
        let corpus = base.join("corpus");
        generate_synthetic(&corpus, 1, 30, SynthDomain::A).unwrap();
        let source = CorpusSource::discover(&corpus).unwrap();
        let fused = fuse_corpora(&[source], &base.join("store"), 7).unwrap();
        for split in Split::ALL {
            assert!(
                fused.manifest.stats.per_split_patches.contains_key(split.as_str()),
                "missing {split}: {:?}",
                fused.manifest.stats.per_split_patches
            );
        }
    }
}
