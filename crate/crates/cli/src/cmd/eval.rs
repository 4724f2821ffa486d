use std::path::PathBuf;

use buildseg_core::data::Split;
use buildseg_core::error::{Error, Result};
use buildseg_core::eval::{
    evaluate, render_overlay, write_ppm, ConstantPredictor, EchoPredictor, InvertedPredictor,
    ModelPredictor, Predictor,
};
use buildseg_core::model::{load_checkpoint, Model};
use clap::Args;

use super::{base_config, echo_config, open_stores, under_out};
use crate::config::RunConfig;
use crate::Globals;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint path, or an oracle predictor: echo, invert, constant0,
    /// constant1.
    #[arg(long)]
    pub checkpoint: String,
    /// Patch store root or manifest.jsonl path; repeatable (defaults to
    /// data.stores).
    #[arg(long = "manifest", value_name = "PATH")]
    pub manifests: Vec<PathBuf>,
    /// Boundary band width in pixels (default: patch-size rule).
    #[arg(long)]
    pub biou_d: Option<usize>,
    /// micro or per-image.
    #[arg(long)]
    pub averaging: Option<String>,
    /// Write per-patch prediction overlays into this directory (relative
    /// paths land under --out).
    #[arg(long, value_name = "DIR")]
    pub overlays: Option<PathBuf>,
    /// Overlay blend weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Split to score: train, val or test.
    #[arg(long)]
    pub split: Option<String>,
}

pub fn make_predictor(cfg: &RunConfig, spec: &str) -> Result<Box<dyn Predictor>> {
    match spec {
        "echo" => Ok(Box::new(EchoPredictor)),
        "invert" => Ok(Box::new(InvertedPredictor)),
        "constant0" => Ok(Box::new(ConstantPredictor(0))),
        "constant1" => Ok(Box::new(ConstantPredictor(1))),
        path => {
            let resolved = under_out(cfg, std::path::Path::new(path))?;
            let ckpt = load_checkpoint(&resolved)?;
            let model = Model::<f32>::from_checkpoint(&ckpt)?;
            let label = resolved
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.to_string());
            Ok(Box::new(ModelPredictor::new(model, label)))
        }
    }
}

pub fn run(globals: &Globals, args: &EvalArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if !args.manifests.is_empty() {
        cfg.data.stores = args.manifests.clone();
    }
    if let Some(d) = args.biou_d {
        cfg.eval.band_d = Some(d);
    }
    if let Some(a) = &args.averaging {
        cfg.eval.averaging = Some(a.clone());
    }
    if let Some(a) = args.alpha {
        cfg.eval.alpha = Some(a);
    }
    if let Some(s) = &args.split {
        cfg.eval.split = Some(s.clone());
    }
    cfg.resolve()?;
    echo_config(&cfg)?;

    if cfg.data.stores.is_empty() {
        return Err(Error::Config(
            "no patch stores; pass --manifest or set data.stores".into(),
        ));
    }
    let stores = open_stores(&cfg.data.stores)?;
    let store_refs: Vec<_> = stores.iter().collect();
    let split: Split = cfg.eval.split.as_deref().unwrap_or("test").parse()?;
    let predictor = make_predictor(&cfg, &args.checkpoint)?;
    let opts = cfg.eval_options()?;

    let overlay_dir = match &args.overlays {
        Some(dir) => {
            let dir = under_out(&cfg, dir)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            Some(dir)
        }
        None => None,
    };
    let alpha = cfg.alpha();
    let mut write_overlay = |entry: &buildseg_core::data::ManifestEntry,
                             patch: &buildseg_core::data::PatchPair,
                             pred: &buildseg_core::metrics::Mask|
     -> Result<()> {
        let dir = overlay_dir.as_ref().expect("sink only wired when set");
        let blended = render_overlay(&patch.image, pred, alpha)?;
        let name = format!("{}_{}_{}.ppm", entry.id, entry.tile_row, entry.tile_col);
        write_ppm(&blended, &dir.join(name))
    };

    let report = if overlay_dir.is_some() {
        evaluate(predictor.as_ref(), &store_refs, split, &opts, Some(&mut write_overlay))?
    } else {
        evaluate(predictor.as_ref(), &store_refs, split, &opts, None)?
    };

    let report_dir = cfg.out_root()?.join("reports");
    let written = report.emit(&report_dir, "report")?;
    print!("{}", report.text_table());
    for path in written {
        println!("wrote {}", path.display());
    }
    if let Some(dir) = overlay_dir {
        println!("overlays in {}", dir.display());
    }
    Ok(())
}
