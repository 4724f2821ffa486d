//! Learning-rate policy: linear warmup into polynomial decay.
//!
//! Warmup ramps linearly from `base_lr * warmup_ratio` to `base_lr` over
//! `warmup_iters`; afterwards the rate decays as
//! `(base_lr - min_lr) * (1 - progress)^power + min_lr`. Both branches
//! evaluate to exactly `base_lr` at the boundary.

use crate::error::{Error, Result};
use crate::train::config::OptimConfig;

pub fn lr_at(cfg: &OptimConfig, t: u64) -> Result<f64> {
    if t > cfg.max_iters {
        return Err(Error::Train(format!(
            "step {t} is outside the schedule (max_iters {})",
            cfg.max_iters
        )));
    }
    if t <= cfg.warmup_iters && cfg.warmup_iters > 0 {
        let progress = t as f64 / cfg.warmup_iters as f64;
        Ok(cfg.base_lr * (1.0 - (1.0 - progress) * (1.0 - cfg.warmup_ratio)))
    } else {
        let span = (cfg.max_iters - cfg.warmup_iters) as f64;
        let progress = if span == 0.0 { 1.0 } else { (t - cfg.warmup_iters) as f64 / span };
        Ok((cfg.base_lr - cfg.min_lr) * (1.0 - progress).powf(cfg.power) + cfg.min_lr)
    }
}
