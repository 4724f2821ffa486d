use buildseg_core::error::{Error, Result};
use buildseg_core::model::check_model_gradients;
use buildseg_core::tensor::check_all_ops;
use clap::Args;

use super::{base_config, echo_config};
use crate::Globals;

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Random instances per operation.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    /// Probed coordinates per model parameter tensor.
    #[arg(long, default_value_t = 2)]
    pub coords: usize,
    /// Model input side length.
    #[arg(long, default_value_t = 32)]
    pub side: usize,
    /// Model preset to probe: tiny or small.
    #[arg(long)]
    pub model: Option<String>,
}

const GATE_F64: f64 = 1e-4;
const GATE_F32: f64 = 1e-3;

pub fn run(globals: &Globals, args: &GradcheckArgs) -> Result<()> {
    let mut cfg = base_config(globals)?;
    if let Some(preset) = &args.model {
        cfg.model.preset = Some(preset.clone());
        cfg.model.config = None;
    } else if cfg.model.config.is_none() && cfg.model.preset.is_none() {
        cfg.model.preset = Some("tiny".into());
    }
    cfg.resolve()?;
    echo_config(&cfg)?;

    let seed = cfg.seed();
    let reports = check_all_ops(args.cases, seed)?;
    println!("{:<22} {:>6} {:>12} {:>12}", "op", "cases", "max err f64", "max err f32");
    let mut max64 = 0.0f64;
    let mut max32 = 0.0f64;
    for r in &reports {
        println!("{:<22} {:>6} {:>12.3e} {:>12.3e}", r.op, r.cases, r.max_err_f64, r.max_err_f32);
        max64 = max64.max(r.max_err_f64);
        max32 = max32.max(r.max_err_f32);
    }

    let model_report = check_model_gradients(&cfg.model_config(), args.side, args.coords, seed)?;
    println!(
        "{:<22} {:>6} {:>12.3e} {:>12.3e}  (worst: {})",
        "model",
        model_report.coords,
        model_report.max_err_f64,
        model_report.max_err_f32,
        model_report.worst_param
    );
    max64 = max64.max(model_report.max_err_f64);
    max32 = max32.max(model_report.max_err_f32);

    println!("max relative error: {max64:.3e} (f64), {max32:.3e} (f32)");
    if max64 > GATE_F64 || max32 > GATE_F32 {
        return Err(Error::Train(format!(
            "gradient check failed: f64 {max64:.3e} (gate {GATE_F64:.0e}), \
             f32 {max32:.3e} (gate {GATE_F32:.0e})"
        )));
    }
    println!("gradient check passed");
    Ok(())
}
