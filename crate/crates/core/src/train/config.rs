//! Optimizer and run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AdamW plus schedule constants. `paper()` is the published recipe;
/// `desk()` shrinks the budget to desk scale while keeping the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub warmup_iters: u64,
    pub warmup_ratio: f64,
    pub power: f64,
    pub min_lr: f64,
    pub max_iters: u64,
    pub batch_size: usize,
    pub seed: u64,
}

impl OptimConfig {
    /// The published constants: lr 6e-4, linear warmup 1500, poly power 1,
    /// batch 32. `max_iters` is never published, so it stays a required
    /// argument.
    pub fn paper(max_iters: u64) -> Self {
        Self {
            base_lr: 0.0006,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.01,
            eps: 1e-8,
            warmup_iters: 1500,
            warmup_ratio: 1e-6,
            power: 1.0,
            min_lr: 0.0,
            max_iters,
            batch_size: 32,
            seed: 0,
        }
    }

    /// Desk-scale profile: batch 8 and warmup shrunk with the budget
    /// (warmup = min(1500, max_iters / 10)).
    pub fn desk(max_iters: u64) -> Self {
        Self {
            batch_size: 8,
            warmup_iters: 1500.min(max_iters / 10),
            ..Self::paper(max_iters)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("optimizer: {msg}")))
            }
        };
        check(
            self.beta1 > 0.0 && self.beta1 < self.beta2 && self.beta2 < 1.0,
            &format!("need 0 < beta1 < beta2 < 1, got {} and {}", self.beta1, self.beta2),
        )?;
        check(self.base_lr.is_finite() && self.base_lr > 0.0, "base_lr must be positive")?;
        check(self.min_lr >= 0.0 && self.base_lr > self.min_lr, "need base_lr > min_lr >= 0")?;
        check(self.warmup_iters <= self.max_iters, "warmup must not exceed max_iters")?;
        check(self.warmup_ratio > 0.0 && self.warmup_ratio <= 1.0, "warmup_ratio in (0,1]")?;
        check(self.power > 0.0, "power must be positive")?;
        check(self.weight_decay >= 0.0, "weight_decay must be nonnegative")?;
        check(self.eps > 0.0, "eps must be positive")?;
        check(self.max_iters > 0, "max_iters must be positive")?;
        check(self.batch_size > 0, "batch_size must be positive")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_constants() {
        let cfg = OptimConfig::paper(160_000);
        assert_eq!(cfg.base_lr, 0.0006);
        assert_eq!(cfg.beta1, 0.9);
        assert_eq!(cfg.beta2, 0.999);
        assert_eq!(cfg.weight_decay, 0.01);
        assert_eq!(cfg.warmup_iters, 1500);
        assert_eq!(cfg.warmup_ratio, 1e-6);
        assert_eq!(cfg.power, 1.0);
        assert_eq!(cfg.min_lr, 0.0);
        assert_eq!(cfg.batch_size, 32);
        cfg.validate().unwrap();
    }

    #[test]
    fn desk_scales_warmup_with_budget() {
        assert_eq!(OptimConfig::desk(2000).warmup_iters, 200);
        assert_eq!(OptimConfig::desk(300).warmup_iters, 30);
        assert_eq!(OptimConfig::desk(100_000).warmup_iters, 1500);
        assert_eq!(OptimConfig::desk(300).batch_size, 8);
        OptimConfig::desk(300).validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = OptimConfig::paper(1000);
        cfg.warmup_iters = 2000;
        assert!(cfg.validate().is_err());

        let mut cfg = OptimConfig::paper(1000);
        cfg.beta2 = 0.5;
        assert!(cfg.validate().is_err());

        let mut cfg = OptimConfig::paper(1000);
        cfg.min_lr = 0.01;
        assert!(cfg.validate().is_err());

        let mut cfg = OptimConfig::paper(1000);
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }
}
