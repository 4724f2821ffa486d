//! Run configuration: a TOML file with optional fields, flag overrides on
//! top, then defaults filled in. The resolved struct is echoed into the
//! output directory so any run can be repeated from its artifacts alone.

use std::path::{Path, PathBuf};

use buildseg_core::data::SynthDomain;
use buildseg_core::error::{Error, Result};
use buildseg_core::eval::{Averaging, EvalOptions};
use buildseg_core::model::ModelConfig;
use buildseg_core::train::{OptimConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub optimizer: OptimizerSection,
    pub data: DataSection,
    pub output: OutputSection,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `tiny` or `small`; ignored when an explicit `config` table is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_iters: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip: Option<bool>,
    /// Global L2 gradient clip; absent turns clipping off.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balanced: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Corpus roots for `fuse`, each holding an `adapter.toml`.
    pub sources: Vec<PathBuf>,
    /// Patch store roots for `train`, `eval` and `ablate`.
    pub stores: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_mode: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Boundary band width; absent picks the patch-size default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub averaging: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenes: Option<usize>,
    /// `a`, `b`, or `both`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fill every unset field with its documented default and validate the
    /// result. Paper mode swaps the optimizer defaults for the published
    /// constants and then requires an explicit iteration budget.
    pub fn resolve(&mut self) -> Result<()> {
        let paper = self.output.paper_mode.unwrap_or(false);
        self.output.paper_mode = Some(paper);
        let workers = self.output.workers.unwrap_or(1);
        if workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.output.workers = Some(workers);

        if self.model.config.is_none() {
            let preset = self.model.preset.get_or_insert_with(|| "small".into());
            self.model.config = Some(ModelConfig::by_name(preset)?);
        }
        self.model.config.as_ref().expect("just filled").validate()?;

        if paper && self.optimizer.max_iters.is_none() {
            return Err(Error::Config(
                "paper mode does not define an iteration budget; set optimizer.max_iters".into(),
            ));
        }
        let max_iters = self.optimizer.max_iters.unwrap_or(2000);
        let base =
            if paper { OptimConfig::paper(max_iters) } else { OptimConfig::desk(max_iters) };
        let o = &mut self.optimizer;
        o.max_iters = Some(max_iters);
        o.batch_size = Some(o.batch_size.unwrap_or(base.batch_size));
        o.base_lr = Some(o.base_lr.unwrap_or(base.base_lr));
        o.beta1 = Some(o.beta1.unwrap_or(base.beta1));
        o.beta2 = Some(o.beta2.unwrap_or(base.beta2));
        o.weight_decay = Some(o.weight_decay.unwrap_or(base.weight_decay));
        o.eps = Some(o.eps.unwrap_or(base.eps));
        o.warmup_iters = Some(o.warmup_iters.unwrap_or(base.warmup_iters));
        o.warmup_ratio = Some(o.warmup_ratio.unwrap_or(base.warmup_ratio));
        o.power = Some(o.power.unwrap_or(base.power));
        o.min_lr = Some(o.min_lr.unwrap_or(base.min_lr));
        o.seed = Some(o.seed.unwrap_or(base.seed));
        o.flip = Some(o.flip.unwrap_or(false));
        o.balanced = Some(o.balanced.unwrap_or(false));
        o.checkpoint_every = Some(o.checkpoint_every.unwrap_or(0));
        if let Some(clip) = o.grad_clip {
            if !(clip > 0.0) {
                return Err(Error::Config("grad_clip must be positive when set".into()));
            }
        }
        self.optim()?.validate()?;

        let e = &mut self.eval;
        let averaging = e.averaging.get_or_insert_with(|| "micro".into());
        Averaging::parse(averaging)?;
        let alpha = e.alpha.unwrap_or(0.45);
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha {alpha} is outside [0, 1]")));
        }
        e.alpha = Some(alpha);
        let split = e.split.get_or_insert_with(|| "test".into());
        split.parse::<buildseg_core::data::Split>()?;

        let scenes = self.synth.scenes.unwrap_or(12);
        if scenes == 0 {
            return Err(Error::Config("synth.scenes must be at least 1".into()));
        }
        self.synth.scenes = Some(scenes);
        let domain = self.synth.domain.get_or_insert_with(|| "both".into());
        if !matches!(domain.as_str(), "a" | "b" | "both") {
            return Err(Error::Config(format!(
                "synth.domain must be a, b or both, got {domain}"
            )));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        self.model.config.clone().expect("resolved config")
    }

    pub fn optim(&self) -> Result<OptimConfig> {
        let o = &self.optimizer;
        let get = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("optimizer.{name} is unset")))
        };
        Ok(OptimConfig {
            base_lr: get("base_lr", o.base_lr)?,
            beta1: get("beta1", o.beta1)?,
            beta2: get("beta2", o.beta2)?,
            weight_decay: get("weight_decay", o.weight_decay)?,
            eps: get("eps", o.eps)?,
            warmup_iters: o.warmup_iters.unwrap_or(0),
            warmup_ratio: get("warmup_ratio", o.warmup_ratio)?,
            power: get("power", o.power)?,
            min_lr: get("min_lr", o.min_lr)?,
            max_iters: o.max_iters.unwrap_or(0),
            batch_size: o.batch_size.unwrap_or(0),
            seed: o.seed.unwrap_or(0),
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::new(self.optim()?);
        cfg.flip = self.optimizer.flip.unwrap_or(false);
        cfg.grad_clip = self.optimizer.grad_clip;
        cfg.balanced = self.optimizer.balanced.unwrap_or(false);
        cfg.checkpoint_every = self.optimizer.checkpoint_every.unwrap_or(0);
        Ok(cfg)
    }

    pub fn eval_options(&self) -> Result<EvalOptions> {
        Ok(EvalOptions {
            band_d: self.eval.band_d,
            averaging: Averaging::parse(self.eval.averaging.as_deref().unwrap_or("micro"))?,
            timestamp: String::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.optimizer.seed.unwrap_or(0)
    }

    pub fn alpha(&self) -> f64 {
        self.eval.alpha.unwrap_or(0.45)
    }

    pub fn synth_domains(&self) -> Vec<SynthDomain> {
        match self.synth.domain.as_deref() {
            Some("a") => vec![SynthDomain::A],
            Some("b") => vec![SynthDomain::B],
            _ => vec![SynthDomain::A, SynthDomain::B],
        }
    }

    pub fn out_root(&self) -> Result<&Path> {
        self.output.root.as_deref().ok_or_else(|| {
            Error::Config("no output directory; pass --out or set output.root".into())
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_the_desk_profile() {
        let mut cfg = RunConfig::default();
        cfg.resolve().unwrap();
        let optim = cfg.optim().unwrap();
        assert_eq!(optim.batch_size, 8);
        assert_eq!(optim.max_iters, 2000);
        assert_eq!(optim.warmup_iters, 200);
        assert_eq!(optim.base_lr, 0.0006);
        assert_eq!(cfg.model_config(), ModelConfig::small());
    }

    #[test]
    fn paper_mode_needs_an_iteration_budget() {
        let mut cfg = RunConfig::default();
        cfg.output.paper_mode = Some(true);
        assert!(cfg.resolve().is_err());
        cfg.optimizer.max_iters = Some(4000);
        cfg.resolve().unwrap();
        assert_eq!(cfg.optim().unwrap().batch_size, 32);
        assert_eq!(cfg.optim().unwrap().warmup_iters, 1500);
    }

    #[test]
    fn explicit_fields_survive_resolution() {
        let mut cfg: RunConfig = toml::from_str(
            "[optimizer]\nbase_lr = 0.002\nmax_iters = 100\n[model]\npreset = \"tiny\"\n",
        )
        .unwrap();
        cfg.resolve().unwrap();
        assert_eq!(cfg.optim().unwrap().base_lr, 0.002);
        assert_eq!(cfg.optim().unwrap().warmup_iters, 10);
        assert_eq!(cfg.model_config(), ModelConfig::tiny());
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.output.root = Some(PathBuf::from("runs/x"));
        cfg.resolve().unwrap();
        let text = cfg.to_toml().unwrap();
        let mut again: RunConfig = toml::from_str(&text).unwrap();
        again.resolve().unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml().unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[optimizer]\nlearning_rate = 0.1\n");
        assert!(err.is_err());
    }
}
