use std::path::PathBuf;

use buildseg_core::error::{Error, Result};
use buildseg_core::eval::run_ablation;
use buildseg_core::model::save_checkpoint;
use clap::Args;

use super::{base_config, echo_config, open_store};
use crate::Globals;

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Primary-domain patch store; its test split is the benchmark
    /// (defaults to data.stores[0]).
    pub store_a: Option<PathBuf>,
    /// Auxiliary-domain patch store fused in for the second row
    /// (defaults to data.stores[1]).
    pub store_b: Option<PathBuf>,
    /// Model preset: tiny or small.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn fmt_delta(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:+.4}"),
        None => "undefined".into(),
    }
}

pub fn run(globals: &Globals, args: &AblateArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if let Some(a) = &args.store_a {
        if cfg.data.stores.is_empty() {
            cfg.data.stores.push(a.clone());
        } else {
            cfg.data.stores[0] = a.clone();
        }
    }
    if let Some(b) = &args.store_b {
        while cfg.data.stores.len() < 2 {
            cfg.data.stores.push(b.clone());
        }
        cfg.data.stores[1] = b.clone();
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
    cfg.resolve()?;
    echo_config(&cfg)?;

    if cfg.data.stores.len() < 2 {
        return Err(Error::Config(
            "ablation needs two patch stores (primary, auxiliary)".into(),
        ));
    }
    let store_a = open_store(&cfg.data.stores[0])?;
    let store_b = open_store(&cfg.data.stores[1])?;

    let outcome = run_ablation::<f32>(
        &store_a,
        &store_b,
        &cfg.model_config(),
        &cfg.train_config()?,
        cfg.seed(),
        &cfg.eval_options()?,
    )?;

    let out = cfg.out_root()?;
    let ckpt_dir = out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    save_checkpoint(&outcome.self_checkpoint, &ckpt_dir.join("self.ckpt"))?;
    save_checkpoint(&outcome.fusion_checkpoint, &ckpt_dir.join("fusion.ckpt"))?;

    let report = &outcome.report;
    let written = report.report.emit(&out.join("reports"), "ablation")?;
    print!("{}", report.report.text_table());
    println!("fusion - self: IoU {}, BIoU {}", fmt_delta(report.iou_delta), fmt_delta(report.biou_delta));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
