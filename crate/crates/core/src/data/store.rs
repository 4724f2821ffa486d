//! On-disk patch store.
//!
//! Layout under a store root:
//!
//! ```text
//! patches/<split>/<dataset>/<id>_<r>_<c>.img   raw 196608 bytes, 256x256x3 RGB
//! patches/<split>/<dataset>/<id>_<r>_<c>.msk   raw 65536 bytes, values {0,1}
//! stats.json                                   corpus-level stats
//! manifest.jsonl                               one entry per patch, written last
//! ```
//!
//! The manifest is the completion marker: it is written after every patch
//! file, so a readable manifest implies a complete store. Every file carries
//! a sha256 in its manifest entry and reads verify it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::image_buf::ImageBuf;
use crate::data::patch::{PatchPair, Provenance, PATCH_SIZE};
use crate::data::record::{DatasetTag, SampleRecord, Split};
use crate::data::tile::patch_count;
use crate::error::{Error, Result};
use crate::metrics::{Mask, Rect};

pub const IMG_BYTES: usize = PATCH_SIZE * PATCH_SIZE * 3;
pub const MSK_BYTES: usize = PATCH_SIZE * PATCH_SIZE;

/// One manifest line: the source record's fields, the patch's provenance,
/// and a checksum per stored file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub dataset: DatasetTag,
    pub image_uri: String,
    pub mask_uri: String,
    pub width: usize,
    pub height: usize,
    pub split: Split,
    pub tile_row: usize,
    pub tile_col: usize,
    pub valid: Rect,
    pub img_sha256: String,
    pub msk_sha256: String,
}

impl ManifestEntry {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            record_id: self.id.clone(),
            tile_row: self.tile_row,
            tile_col: self.tile_col,
            valid: self.valid,
        }
    }

    /// Store-relative paths of the two patch files.
    pub fn rel_paths(&self) -> (PathBuf, PathBuf) {
        let dir = Path::new("patches").join(self.split.as_str()).join(self.dataset.as_str());
        let stem = format!("{}_{}_{}", self.id, self.tile_row, self.tile_col);
        (dir.join(format!("{stem}.img")), dir.join(format!("{stem}.msk")))
    }
}

/// Corpus-level statistics, written to `stats.json` and recomputable from
/// the store contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub patches: usize,
    pub per_dataset_patches: BTreeMap<String, usize>,
    pub per_split_patches: BTreeMap<String, usize>,
    /// Building pixels over valid pixels, across all patches.
    pub building_fraction: f64,
}

/// Ordered manifest plus stats: the in-memory view of a complete store.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub stats: CorpusStats,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A record with its tiled patches, ready to be written.
#[derive(Debug, Clone)]
pub struct StoreItem {
    pub record: SampleRecord,
    pub patches: Vec<PatchPair>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn entry_sort_key(e: &ManifestEntry) -> (&str, usize, usize) {
    (&e.id, e.tile_row, e.tile_col)
}

fn stats_from(entries: &[ManifestEntry], records: usize, building: u64, valid: u64) -> CorpusStats {
    let mut per_dataset = BTreeMap::new();
    let mut per_split = BTreeMap::new();
    for e in entries {
        *per_dataset.entry(e.dataset.to_string()).or_insert(0) += 1;
        *per_split.entry(e.split.to_string()).or_insert(0) += 1;
    }
    CorpusStats {
        records,
        patches: entries.len(),
        per_dataset_patches: per_dataset,
        per_split_patches: per_split,
        building_fraction: if valid == 0 { 0.0 } else { building as f64 / valid as f64 },
    }
}

/// Write a complete store. Items are sorted by record id and patches by
/// (row, col), so identical inputs produce byte-identical stores.
pub fn write_patch_store(root: &Path, items: &[StoreItem]) -> Result<Manifest> {
    if items.is_empty() {
        return Err(Error::Data("refusing to write an empty patch store".into()));
    }
    let mut items: Vec<&StoreItem> = items.iter().collect();
    items.sort_by(|a, b| a.record.id.cmp(&b.record.id));
    if let Some(w) = items.windows(2).find(|w| w[0].record.id == w[1].record.id) {
        return Err(Error::Data(format!("duplicate record id {:?}", w[0].record.id)));
    }

    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut entries = Vec::new();
    let mut building = 0u64;
    let mut valid_px = 0u64;

    for item in &items {
        let expect = patch_count(item.record.width, item.record.height);
        if item.patches.len() != expect {
            return Err(Error::Data(format!(
                "record {} is {}x{} and needs {expect} patches, got {}",
                item.record.id,
                item.record.width,
                item.record.height,
                item.patches.len()
            )));
        }
        let mut patches: Vec<&PatchPair> = item.patches.iter().collect();
        patches.sort_by_key(|p| (p.provenance.tile_row, p.provenance.tile_col));
        for patch in patches {
            if patch.provenance.record_id != item.record.id {
                return Err(Error::Data(format!(
                    "patch provenance {:?} does not match record {:?}",
                    patch.provenance.record_id, item.record.id
                )));
            }
            let entry = ManifestEntry {
                id: item.record.id.clone(),
                dataset: item.record.dataset,
                image_uri: item.record.image_uri.clone(),
                mask_uri: item.record.mask_uri.clone(),
                width: item.record.width,
                height: item.record.height,
                split: item.record.split,
                tile_row: patch.provenance.tile_row,
                tile_col: patch.provenance.tile_col,
                valid: patch.provenance.valid,
                img_sha256: sha256_hex(patch.image.data()),
                msk_sha256: sha256_hex(patch.mask.data()),
            };
            let (img_rel, msk_rel) = entry.rel_paths();
            let img_path = root.join(img_rel);
            let dir = img_path.parent().expect("patch path has a parent");
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            std::fs::write(&img_path, patch.image.data()).map_err(|e| Error::io(&img_path, e))?;
            let msk_path = root.join(msk_rel);
            std::fs::write(&msk_path, patch.mask.data()).map_err(|e| Error::io(&msk_path, e))?;
            building += patch.building_pixels();
            valid_px += patch.provenance.valid.area() as u64;
            entries.push(entry);
        }
    }
    entries.sort_by(|a, b| entry_sort_key(a).cmp(&entry_sort_key(b)));

    let stats = stats_from(&entries, items.len(), building, valid_px);
    let stats_path = root.join("stats.json");
    let stats_text = serde_json::to_string_pretty(&stats)
        .map_err(|e| Error::Data(format!("stats serialization: {e}")))?;
    std::fs::write(&stats_path, stats_text).map_err(|e| Error::io(&stats_path, e))?;

    let mut manifest_text = String::new();
    for e in &entries {
        manifest_text.push_str(
            &serde_json::to_string(e).map_err(|er| Error::Data(format!("manifest: {er}")))?,
        );
        manifest_text.push('\n');
    }
    let manifest_path = root.join("manifest.jsonl");
    std::fs::write(&manifest_path, manifest_text).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(Manifest { entries, stats })
}

/// A store opened for reading. Opening parses the manifest and stats;
/// patch bytes are read and checksum-verified per entry on demand.
#[derive(Debug, Clone)]
pub struct PatchStore {
    root: PathBuf,
    manifest: Manifest,
}

impl PatchStore {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest_path = root.join("manifest.jsonl");
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line)
                .map_err(|e| Error::format(&manifest_path, format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::format(&manifest_path, "manifest has no entries"));
        }
        let sorted = entries.windows(2).all(|w| entry_sort_key(&w[0]) <= entry_sort_key(&w[1]));
        if !sorted {
            return Err(Error::format(&manifest_path, "entries are not sorted by id/tile"));
        }
        let stats_path = root.join("stats.json");
        let stats_text =
            std::fs::read_to_string(&stats_path).map_err(|e| Error::io(&stats_path, e))?;
        let stats: CorpusStats = serde_json::from_str(&stats_text)
            .map_err(|e| Error::format(&stats_path, e.to_string()))?;
        if stats.patches != entries.len() {
            return Err(Error::format(
                &stats_path,
                format!("stats claim {} patches, manifest has {}", stats.patches, entries.len()),
            ));
        }
        Ok(Self { root: root.to_path_buf(), manifest: Manifest { entries, stats } })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.manifest.entries
    }

    pub fn entries_for_split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.manifest.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Read, length-check and checksum-verify one patch.
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<PatchPair> {
        let (img_rel, msk_rel) = entry.rel_paths();
        let img_path = self.root.join(img_rel);
        let img_bytes = std::fs::read(&img_path).map_err(|e| Error::io(&img_path, e))?;
        if img_bytes.len() != IMG_BYTES {
            return Err(Error::format(
                &img_path,
                format!("expected {IMG_BYTES} bytes, found {}", img_bytes.len()),
            ));
        }
        if sha256_hex(&img_bytes) != entry.img_sha256 {
            return Err(Error::format(&img_path, "checksum mismatch"));
        }
        let msk_path = self.root.join(msk_rel);
        let msk_bytes = std::fs::read(&msk_path).map_err(|e| Error::io(&msk_path, e))?;
        if msk_bytes.len() != MSK_BYTES {
            return Err(Error::format(
                &msk_path,
                format!("expected {MSK_BYTES} bytes, found {}", msk_bytes.len()),
            ));
        }
        if sha256_hex(&msk_bytes) != entry.msk_sha256 {
            return Err(Error::format(&msk_path, "checksum mismatch"));
        }
        let image = ImageBuf::new(PATCH_SIZE, PATCH_SIZE, img_bytes)?;
        let mask = Mask::new(PATCH_SIZE, PATCH_SIZE, msk_bytes)
            .map_err(|e| Error::format(&msk_path, e.to_string()))?;
        PatchPair::new(image, mask, entry.provenance())
    }

    /// Full integrity pass: every entry loads and verifies, the patch-file
    /// count on disk matches the manifest, and stored stats match a
    /// recomputation.
    pub fn verify(&self) -> Result<()> {
        let mut building = 0u64;
        let mut valid = 0u64;
        let mut records = std::collections::BTreeSet::new();
        for entry in self.entries() {
            let patch = self.load_entry(entry)?;
            building += patch.building_pixels();
            valid += entry.valid.area() as u64;
            records.insert(entry.id.clone());
        }
        let (imgs, msks) = self.count_patch_files()?;
        if imgs != self.manifest.len() || msks != self.manifest.len() {
            return Err(Error::Data(format!(
                "manifest lists {} patches but store has {imgs} .img / {msks} .msk files",
                self.manifest.len()
            )));
        }
        let recomputed = stats_from(&self.manifest.entries, records.len(), building, valid);
        if recomputed != self.manifest.stats {
            return Err(Error::Data(format!(
                "stored stats {:?} differ from recomputed {recomputed:?}",
                self.manifest.stats
            )));
        }
        Ok(())
    }

    fn count_patch_files(&self) -> Result<(usize, usize)> {
        let mut imgs = 0;
        let mut msks = 0;
        let base = self.root.join("patches");
        let mut stack = vec![base];
        while let Some(dir) = stack.pop() {
            if !dir.is_dir() {
                continue;
            }
            for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let path = entry.map_err(|e| Error::io(&dir, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    match path.extension().and_then(|e| e.to_str()) {
                        Some("img") => imgs += 1,
                        Some("msk") => msks += 1,
                        _ => {}
                    }
                }
            }
        }
        Ok((imgs, msks))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::image_buf::ImageBuf;
    use crate::data::tile::tile_to_patches;

    fn temp_root(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("buildseg_store_tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn demo_items(n: usize) -> Vec<StoreItem> {
        (0..n)
            .map(|i| {
                let w = 300;
                let h = 260;
                let mut img = ImageBuf::zeros(w, h);
                for y in 0..h {
                    for x in 0..w {
                        img.set_pixel(x, y, [(x + i) as u8, (y + i) as u8, (x * y % 256) as u8]);
                    }
                }
                let msk = Mask::from_fn(w, h, |x, y| u8::from((x + y + i) % 7 == 0));
                let id = format!("synthetic_scene_{i:03}");
                let record = SampleRecord {
                    id: id.clone(),
                    dataset: DatasetTag::Synthetic,
                    image_uri: format!("src/images/scene_{i:03}.png"),
                    mask_uri: format!("src/masks/scene_{i:03}.png"),
                    width: w,
                    height: h,
                    split: if i % 3 == 0 { Split::Test } else { Split::Train },
                };
                let patches = tile_to_patches(&id, &img, &msk).unwrap();
                StoreItem { record, patches }
            })
            .collect()
    }

    #[test]
    fn round_trip_preserves_patch_bytes() {
        let root = temp_root("round_trip");
        let items = demo_items(3);
        let manifest = write_patch_store(&root, &items).unwrap();
        assert_eq!(manifest.len(), 3 * 4);

        let store = PatchStore::open(&root).unwrap();
        assert_eq!(store.manifest(), &manifest);
        for (entry, item) in store.entries().iter().zip(
            items.iter().flat_map(|it| it.patches.iter().map(move |p| (it.record.id.clone(), p))),
        ) {
            let loaded = store.load_entry(entry).unwrap();
            assert_eq!(entry.id, item.0);
            assert_eq!(&loaded, item.1);
        }
        store.verify().unwrap();
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let root_a = temp_root("bytes_a");
        let root_b = temp_root("bytes_b");
        let items = demo_items(2);
        write_patch_store(&root_a, &items).unwrap();
        write_patch_store(&root_b, &items).unwrap();
        for name in ["manifest.jsonl", "stats.json"] {
            let a = std::fs::read(root_a.join(name)).unwrap();
            let b = std::fs::read(root_b.join(name)).unwrap();
            assert_eq!(a, b, "{name}");
        }
        let store = PatchStore::open(&root_a).unwrap();
        for e in store.entries() {
            let (img, msk) = e.rel_paths();
            assert_eq!(
                std::fs::read(root_a.join(&img)).unwrap(),
                std::fs::read(root_b.join(&img)).unwrap()
            );
            assert_eq!(
                std::fs::read(root_a.join(&msk)).unwrap(),
                std::fs::read(root_b.join(&msk)).unwrap()
            );
        }
    }

    #[test]
    fn layout_matches_contract() {
        let root = temp_root("layout");
        let items = demo_items(1);
        write_patch_store(&root, &items).unwrap();
        let img = root.join("patches/test/synthetic/synthetic_scene_000_0_0.img");
        let msk = root.join("patches/test/synthetic/synthetic_scene_000_0_1.msk");
        assert_eq!(std::fs::metadata(&img).unwrap().len(), IMG_BYTES as u64);
        assert_eq!(std::fs::metadata(&msk).unwrap().len(), MSK_BYTES as u64);
    }

    #[test]
    fn truncated_patch_file_errors_with_its_name() {
        let root = temp_root("truncated");
        write_patch_store(&root, &demo_items(1)).unwrap();
        let store = PatchStore::open(&root).unwrap();
        let (img_rel, _) = store.entries()[0].rel_paths();
        let victim = root.join(&img_rel);
        let bytes = std::fs::read(&victim).unwrap();
        std::fs::write(&victim, &bytes[..bytes.len() - 1]).unwrap();
        let err = store.load_entry(&store.entries()[0]).unwrap_err();
        assert!(err.to_string().contains("synthetic_scene_000_0_0.img"), "{err}");
    }

    #[test]
    fn corrupted_bytes_fail_checksum() {
        let root = temp_root("corrupt");
        write_patch_store(&root, &demo_items(1)).unwrap();
        let store = PatchStore::open(&root).unwrap();
        let (_, msk_rel) = store.entries()[0].rel_paths();
        let victim = root.join(&msk_rel);
        let mut bytes = std::fs::read(&victim).unwrap();
        bytes[100] ^= 1;
        std::fs::write(&victim, &bytes).unwrap();
        let err = store.load_entry(&store.entries()[0]).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn stats_match_recomputation_and_file_counts() {
        let root = temp_root("stats");
        let manifest = write_patch_store(&root, &demo_items(4)).unwrap();
        assert_eq!(manifest.stats.records, 4);
        assert_eq!(manifest.stats.patches, 16);
        assert_eq!(manifest.stats.per_dataset_patches["synthetic"], 16);
        assert!(manifest.stats.building_fraction > 0.0);
        assert!(manifest.stats.building_fraction < 0.6);
        let store = PatchStore::open(&root).unwrap();
        store.verify().unwrap();

        // An extra stray patch file breaks the count check.
        std::fs::write(root.join("patches/train/synthetic/stray_0_0.img"), [0u8; 1]).unwrap();
        assert!(store.verify().is_err());
    }

    #[test]
    fn wrong_patch_count_is_rejected() {
        let root = temp_root("wrong_count");
        let mut items = demo_items(1);
        items[0].patches.pop();
        assert!(write_patch_store(&root, &items).is_err());
    }

    #[test]
    fn missing_manifest_fails_open() {
        let root = temp_root("no_manifest");
        assert!(PatchStore::open(&root).is_err());
    }
}
