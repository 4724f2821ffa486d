//! Subcommand implementations. Each `run` resolves the configuration the
//! same way: config file if given, global flags, subcommand flags, then
//! documented defaults.

pub mod ablate;
pub mod eval;
pub mod fuse;
pub mod gradcheck;
pub mod infer;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use buildseg_core::data::PatchStore;
use buildseg_core::error::{Error, Result};

use crate::config::RunConfig;
use crate::Globals;

/// File + global flags, not yet resolved; subcommands overlay their own
/// flags before calling [`RunConfig::resolve`].
pub fn base_config(globals: &Globals) -> Result<RunConfig> {
    let mut cfg = match &globals.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = globals.seed {
        cfg.optimizer.seed = Some(seed);
    }
    if let Some(out) = &globals.out {
        cfg.output.root = Some(out.clone());
    }
    if let Some(workers) = globals.workers {
        cfg.output.workers = Some(workers);
    }
    if globals.paper_mode {
        cfg.output.paper_mode = Some(true);
    }
    Ok(cfg)
}

/// Print the resolved configuration and, when an output root is set, copy it
/// to `<out>/config.toml` so the run can be reproduced from its artifacts.
pub fn echo_config(cfg: &RunConfig) -> Result<()> {
    let text = cfg.to_toml()?;
    print!("{text}");
    println!("---");
    if let Ok(root) = cfg.out_root() {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = root.join("config.toml");
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Accept a store root or its manifest.jsonl path.
pub fn open_store(path: &Path) -> Result<PatchStore> {
    let root = if path.file_name().map(|n| n == "manifest.jsonl").unwrap_or(false) {
        path.parent().unwrap_or(path)
    } else {
        path
    };
    PatchStore::open(root)
}

pub fn open_stores(paths: &[PathBuf]) -> Result<Vec<PatchStore>> {
    paths.iter().map(|p| open_store(p)).collect()
}

/// Resolve a possibly relative artifact path under the output root.
pub fn under_out(cfg: &RunConfig, path: &Path) -> Result<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(cfg.out_root()?.join(path))
    }
}
