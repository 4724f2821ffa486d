use std::path::PathBuf;

use buildseg_core::error::{Error, Result};
use buildseg_core::model::Model;
use buildseg_core::train::train_loop;
use clap::Args;

use super::{base_config, echo_config, open_stores};
use crate::Globals;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Patch store root; repeatable (defaults to data.stores).
    #[arg(long = "store", value_name = "DIR")]
    pub stores: Vec<PathBuf>,
    /// Model preset: tiny or small.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Horizontal-flip augmentation.
    #[arg(long)]
    pub flip: bool,
    /// Round-robin the corpora instead of size-proportional sampling.
    #[arg(long)]
    pub balanced: bool,
    /// Global L2 gradient clip.
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Checkpoint every N iterations (0 = final only).
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

pub fn run(globals: &Globals, args: &TrainArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if !args.stores.is_empty() {
        cfg.data.stores = args.stores.clone();
    }
    if let Some(preset) = &args.model {
        cfg.model.preset = Some(preset.clone());
        cfg.model.config = None;
    }
    if let Some(v) = args.max_iters {
        cfg.optimizer.max_iters = Some(v);
    }
    if let Some(v) = args.batch_size {
        cfg.optimizer.batch_size = Some(v);
    }
    if args.flip {
        cfg.optimizer.flip = Some(true);
    }
    if args.balanced {
        cfg.optimizer.balanced = Some(true);
    }
    if let Some(v) = args.grad_clip {
        cfg.optimizer.grad_clip = Some(v);
    }
    if let Some(v) = args.checkpoint_every {
        cfg.optimizer.checkpoint_every = Some(v);
    }
    cfg.resolve()?;
    echo_config(&cfg)?;

    if cfg.data.stores.is_empty() {
        return Err(Error::Config(
            "no patch stores; pass --store or set data.stores".into(),
        ));
    }
    let stores = open_stores(&cfg.data.stores)?;
    let store_refs: Vec<_> = stores.iter().collect();
    let out = cfg.out_root()?.to_path_buf();

    let mut model = Model::<f32>::init(cfg.model_config(), cfg.seed())?;
    let outcome = train_loop(&mut model, &store_refs, &cfg.train_config()?, Some(&out))?;
    if let Some(last) = outcome.log.last() {
        println!("finished at iter {} with loss {:.6}", last.iter, last.loss);
    }
    for path in &outcome.checkpoint_paths {
        println!("checkpoint: {}", path.display());
    }
    println!("loss log: {}", out.join("logs").join("train_log.csv").display());
    Ok(())
}
