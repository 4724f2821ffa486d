use std::path::PathBuf;

use buildseg_core::data::{fuse_corpora, CorpusSource};
use buildseg_core::error::{Error, Result};
use clap::Args;

use super::{base_config, echo_config};
use crate::Globals;

#[derive(Args, Debug)]
pub struct FuseArgs {
    /// Corpus roots, each holding an adapter.toml (defaults to data.sources).
    #[arg(value_name = "CORPUS")]
    pub sources: Vec<PathBuf>,
}

pub fn run(globals: &Globals, args: &FuseArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if !args.sources.is_empty() {
        cfg.data.sources = args.sources.clone();
    }
    cfg.resolve()?;
    echo_config(&cfg)?;

    if cfg.data.sources.is_empty() {
        return Err(Error::Config(
            "no corpora to fuse; pass corpus roots or set data.sources".into(),
        ));
    }
    let sources: Vec<CorpusSource> =
        cfg.data.sources.iter().map(|p| CorpusSource::discover(p)).collect::<Result<_>>()?;
    let store_root = cfg.out_root()?.join("patches");
    let outcome = fuse_corpora(&sources, &store_root, cfg.seed())?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let stats = &outcome.manifest.stats;
    println!(
        "fused {} records into {} patches at {}",
        stats.records,
        stats.patches,
        store_root.display()
    );
    for (split, n) in &stats.per_split_patches {
        println!("  {split}: {n} patches");
    }
    println!("  building fraction: {:.4}", stats.building_fraction);
    Ok(())
}
