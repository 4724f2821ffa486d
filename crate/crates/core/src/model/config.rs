//! Architecture hyperparameters. Two presets: `small` is the desk-scale
//! default, `tiny` is a two-stage model for tests and gradient checking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_stages: usize,
    pub patch_kernels: Vec<usize>,
    pub patch_strides: Vec<usize>,
    pub patch_pads: Vec<usize>,
    pub embed_dims: Vec<usize>,
    pub num_heads: Vec<usize>,
    /// Key/value spatial reduction factor per stage; 1 disables reduction.
    pub sr_ratios: Vec<usize>,
    /// Transformer blocks per stage.
    pub depths: Vec<usize>,
    pub ffn_expansion: usize,
    pub decoder_dim: usize,
    pub num_classes: usize,
}

impl ModelConfig {
    /// Four-stage desk-scale default.
    pub fn small() -> Self {
        ModelConfig {
            num_stages: 4,
            patch_kernels: vec![7, 3, 3, 3],
            patch_strides: vec![4, 2, 2, 2],
            patch_pads: vec![3, 1, 1, 1],
            embed_dims: vec![32, 64, 160, 256],
            num_heads: vec![1, 2, 5, 8],
            sr_ratios: vec![8, 4, 2, 1],
            depths: vec![2, 2, 2, 2],
            ffn_expansion: 4,
            decoder_dim: 256,
            num_classes: 2,
        }
    }

    /// Two-stage model small enough for exhaustive finite differences.
    pub fn tiny() -> Self {
        ModelConfig {
            num_stages: 2,
            patch_kernels: vec![7, 3],
            patch_strides: vec![4, 2],
            patch_pads: vec![3, 1],
            embed_dims: vec![8, 16],
            num_heads: vec![1, 2],
            sr_ratios: vec![4, 2],
            depths: vec![1, 1],
            ffn_expansion: 2,
            decoder_dim: 16,
            num_classes: 2,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "small" => Ok(Self::small()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::Config(format!(
                "unknown model preset '{}'; expected tiny or small",
                other
            ))),
        }
    }

    /// Product of all stage strides: input sides must divide by this.
    pub fn total_stride(&self) -> usize {
        self.patch_strides.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_stages == 0 {
            return Err(Error::Config("model needs at least one stage".into()));
        }
        let per_stage: [(&str, usize); 7] = [
            ("patch_kernels", self.patch_kernels.len()),
            ("patch_strides", self.patch_strides.len()),
            ("patch_pads", self.patch_pads.len()),
            ("embed_dims", self.embed_dims.len()),
            ("num_heads", self.num_heads.len()),
            ("sr_ratios", self.sr_ratios.len()),
            ("depths", self.depths.len()),
        ];
        for (name, len) in per_stage {
            if len != self.num_stages {
                return Err(Error::Config(format!(
                    "{} has {} entries for {} stages",
                    name, len, self.num_stages
                )));
            }
        }
        for i in 0..self.num_stages {
            if self.embed_dims[i] == 0 || self.num_heads[i] == 0 {
                return Err(Error::Config(format!("stage {} has a zero dimension", i)));
            }
            if self.embed_dims[i] % self.num_heads[i] != 0 {
                return Err(Error::Config(format!(
                    "embed dim {} of stage {} not divisible by {} heads",
                    self.embed_dims[i], i, self.num_heads[i]
                )));
            }
            if self.patch_kernels[i] == 0 || self.sr_ratios[i] == 0 || self.depths[i] == 0 {
                return Err(Error::Config(format!("stage {} has a zero field", i)));
            }
            let min_stride = if i == 0 { 1 } else { 2 };
            if self.patch_strides[i] < min_stride {
                return Err(Error::Config(format!(
                    "stage {} stride {} breaks the shrinking pyramid (needs >= {})",
                    i, self.patch_strides[i], min_stride
                )));
            }
        }
        if self.ffn_expansion == 0 || self.decoder_dim == 0 {
            return Err(Error::Config("ffn_expansion and decoder_dim must be positive".into()));
        }
        if self.num_classes != 2 {
            return Err(Error::Config(format!(
                "this pipeline is binary-only, num_classes {} unsupported",
                self.num_classes
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ModelConfig::small().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        assert_eq!(ModelConfig::small().total_stride(), 32);
        assert_eq!(ModelConfig::tiny().total_stride(), 8);
    }

    #[test]
    fn pyramid_must_shrink_after_first_stage() {
        let mut cfg = ModelConfig::small();
        cfg.patch_strides[2] = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn heads_must_divide_dims() {
        let mut cfg = ModelConfig::small();
        cfg.num_heads[1] = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn binary_only() {
        let mut cfg = ModelConfig::tiny();
        cfg.num_classes = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn channel_dims_non_decreasing_in_presets() {
        for cfg in [ModelConfig::small(), ModelConfig::tiny()] {
            for pair in cfg.embed_dims.windows(2) {
                assert!(pair[0] <= pair[1]);
            }
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(ModelConfig::by_name("b5").is_err());
        assert!(ModelConfig::by_name("tiny").is_ok());
    }
}
