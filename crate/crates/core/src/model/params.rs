//! Named parameter storage and seeded initialization. The single source of
//! truth for which parameters a config owns is `for_each_param`; init,
//! checkpointing and compatibility checks all walk it.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::{from_f64, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Dense weight matrix or convolution kernel: truncated-normal init.
    Weight,
    /// Additive bias: zero init.
    Bias,
    /// Layer norm scale: ones init.
    Gamma,
    /// Layer norm shift: zero init.
    Beta,
}

#[derive(Clone, Debug)]
pub struct Param<S> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: Tensor<S>,
}

/// Ordered, name-indexed parameter set. Order is the walker order and is
/// what checkpoints and optimizer state align to.
#[derive(Clone, Debug)]
pub struct ParamSet<S> {
    entries: Vec<Param<S>>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, name: String, kind: ParamKind, tensor: Tensor<S>) -> Result<()> {
        if self.index.contains_key(&name) {
            return Err(Error::Params(format!("duplicate parameter name {}", name)));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(Param { name, kind, tensor });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Param<S>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param<S>] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].tensor)
            .ok_or_else(|| Error::Params(format!("no parameter named {}", name)))
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> ParamSet<T> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    tensor: p.tensor.cast(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }
}

impl<S: Scalar> Default for ParamSet<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Visits every parameter of the architecture in a fixed order.
pub fn for_each_param(cfg: &ModelConfig, mut f: impl FnMut(String, ParamKind, Vec<usize>)) {
    let mut c_in = 3;
    for i in 0..cfg.num_stages {
        let d = cfg.embed_dims[i];
        let k = cfg.patch_kernels[i];
        f(
            format!("encoder.stage{i}.embed.weight"),
            ParamKind::Weight,
            vec![c_in * k * k, d],
        );
        f(format!("encoder.stage{i}.embed.bias"), ParamKind::Bias, vec![d]);
        let d_head = d / cfg.num_heads[i];
        for j in 0..cfg.depths[i] {
            let p = format!("encoder.stage{i}.block{j}");
            f(format!("{p}.norm1.gamma"), ParamKind::Gamma, vec![d]);
            f(format!("{p}.norm1.beta"), ParamKind::Beta, vec![d]);
            for h in 0..cfg.num_heads[i] {
                f(format!("{p}.attn.head{h}.wq"), ParamKind::Weight, vec![d, d_head]);
                f(format!("{p}.attn.head{h}.wk"), ParamKind::Weight, vec![d, d_head]);
                f(format!("{p}.attn.head{h}.wv"), ParamKind::Weight, vec![d, d_head]);
            }
            f(format!("{p}.attn.wo"), ParamKind::Weight, vec![d, d]);
            if cfg.sr_ratios[i] > 1 {
                f(format!("{p}.attn.sr.weight"), ParamKind::Weight, vec![d, d]);
            }
            f(format!("{p}.norm2.gamma"), ParamKind::Gamma, vec![d]);
            f(format!("{p}.norm2.beta"), ParamKind::Beta, vec![d]);
            let e = d * cfg.ffn_expansion;
            f(format!("{p}.ffn.fc1.weight"), ParamKind::Weight, vec![d, e]);
            f(format!("{p}.ffn.fc1.bias"), ParamKind::Bias, vec![e]);
            f(format!("{p}.ffn.fc2.weight"), ParamKind::Weight, vec![e, d]);
            f(format!("{p}.ffn.fc2.bias"), ParamKind::Bias, vec![d]);
        }
        c_in = d;
    }
    let dd = cfg.decoder_dim;
    for i in 0..cfg.num_stages {
        f(
            format!("decoder.proj{i}.weight"),
            ParamKind::Weight,
            vec![cfg.embed_dims[i], dd],
        );
        f(format!("decoder.proj{i}.bias"), ParamKind::Bias, vec![dd]);
    }
    f("decoder.fuse.weight".into(), ParamKind::Weight, vec![cfg.num_stages * dd, dd]);
    f("decoder.fuse.bias".into(), ParamKind::Bias, vec![dd]);
    f(
        "decoder.classifier.weight".into(),
        ParamKind::Weight,
        vec![dd, cfg.num_classes],
    );
    f("decoder.classifier.bias".into(), ParamKind::Bias, vec![cfg.num_classes]);
}

const INIT_STD: f64 = 0.02;

/// Seed-determined init: truncated normal (std 0.02, cut at two std) for
/// weights, zeros for biases and shifts, ones for norm scales. Samples are
/// drawn in f64 and rounded once, so every precision sees the same values.
pub fn init_params<S: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<ParamSet<S>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, INIT_STD).expect("valid std");
    let mut truncated = move || loop {
        let v = normal.sample(&mut rng);
        if v.abs() <= 2.0 * INIT_STD {
            return v;
        }
    };
    let mut set = ParamSet::new();
    let mut push_err = None;
    for_each_param(cfg, |name, kind, shape| {
        if push_err.is_some() {
            return;
        }
        let tensor = match kind {
            ParamKind::Weight => Tensor::from_fn(shape, |_| from_f64(truncated())),
            ParamKind::Bias | ParamKind::Beta => Tensor::zeros(shape),
            ParamKind::Gamma => Tensor::filled(shape, S::one()),
        };
        if let Err(e) = set.push(name, kind, tensor) {
            push_err = Some(e);
        }
    });
    match push_err {
        Some(e) => Err(e),
        None => Ok(set),
    }
}
