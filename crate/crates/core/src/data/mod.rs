//! Data pipeline: adapters, class mapping, tiling, patch stores, and the
//! synthetic corpus generator.
//!
//! The flow is `ingest -> map_classes_binary -> rescale -> tile_to_patches ->
//! write_patch_store`, wrapped end to end by [`fuse_corpora`]. Everything is
//! deterministic given (sources, seed): stores round-trip byte for byte and
//! fusion re-runs reproduce identical manifests.

mod adapter;
mod fuse;
mod image_buf;
mod patch;
mod record;
mod store;
mod synth;
mod tile;

pub use adapter::{
    ingest, map_classes_binary, record_paths, AdapterConfig, ClassMapping, IngestOutcome,
    MappedMask,
};
pub use fuse::{fuse_corpora, CorpusSource, FuseOutcome};
pub use image_buf::{ImageBuf, LabelBuf};
pub use patch::{image_to_tensor, mask_to_targets, PatchPair, Provenance, PATCH_SIZE};
pub use record::{assign_split, DatasetTag, SampleRecord, Split};
pub use store::{
    write_patch_store, CorpusStats, Manifest, ManifestEntry, PatchStore, StoreItem, IMG_BYTES,
    MSK_BYTES,
};
pub use synth::{
    generate_synthetic, scene_stem, synth_scene, synthetic_adapter_config, GeneratedCorpus,
    SynthDomain, MASK_FOREGROUND, SCENE_SIZE,
};
pub use tile::{patch_count, reassemble_mask, tile_to_patches, tiles_along};
