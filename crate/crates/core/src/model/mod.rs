//! Hierarchical attention segmentation model: overlapped patch embedding per
//! stage (strided convolution), pre-norm transformer blocks with spatially
//! reduced keys/values, and an all-MLP decode head that fuses every stage at
//! the stage-one resolution. Output channel 1 is "building".

pub mod attention;
pub mod blocks;
mod checkpoint;
mod config;
mod gradcheck;
mod params;

pub use attention::{
    multi_head_attention, multi_head_attention_probed, scaled_dot_attention,
    scaled_dot_attention_probed, spatial_reduction, AttnWeights, HeadWeights,
};
pub use blocks::{transformer_block, BlockWeights, LN_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointParam};
pub use config::ModelConfig;
pub use gradcheck::{check_model_gradients, ModelGradReport};
pub use params::{for_each_param, init_params, Param, ParamKind, ParamSet};

use crate::error::{Error, Result};
use crate::metrics::Mask;
use crate::scalar::Scalar;
use crate::tensor::{NodeId, Tape, Tensor};

/// One encoder stage output: tokens in row-major grid order plus the grid.
#[derive(Clone, Copy, Debug)]
pub struct StageOut {
    pub tokens: NodeId,
    pub h: usize,
    pub w: usize,
}

/// Tape-resident view of a parameter set: node ids parallel to the entries.
pub struct BoundModel {
    ids: Vec<NodeId>,
}

impl BoundModel {
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

#[derive(Clone, Debug)]
pub struct Model<S: Scalar> {
    config: ModelConfig,
    params: ParamSet<S>,
}

impl<S: Scalar> Model<S> {
    /// Fresh model with seed-determined initialization.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Model { config, params })
    }

    /// Wraps an existing parameter set, verifying it matches the config's
    /// parameter table exactly.
    pub fn from_parts(config: ModelConfig, params: ParamSet<S>) -> Result<Self> {
        config.validate()?;
        let mut expected = Vec::new();
        for_each_param(&config, |name, _, shape| expected.push((name, shape)));
        if expected.len() != params.len() {
            return Err(Error::Params(format!(
                "config wants {} parameters, set has {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), entry) in expected.iter().zip(params.entries()) {
            if *name != entry.name {
                return Err(Error::Params(format!(
                    "parameter order mismatch: expected {}, found {}",
                    name, entry.name
                )));
            }
            if shape.as_slice() != entry.tensor.shape() {
                return Err(Error::Params(format!(
                    "parameter {} has shape {:?}, config wants {:?}",
                    name,
                    entry.tensor.shape(),
                    shape
                )));
            }
        }
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    pub fn cast<T: Scalar>(&self) -> Model<T> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    /// Places every parameter on the tape as a leaf, in entry order.
    pub fn bind(&self, tape: &mut Tape<S>) -> Result<BoundModel> {
        let mut ids = Vec::with_capacity(self.params.len());
        for p in self.params.entries() {
            ids.push(tape.leaf(p.tensor.clone())?);
        }
        Ok(BoundModel { ids })
    }

    fn pid(&self, bound: &BoundModel, name: &str) -> Result<NodeId> {
        self.params
            .position(name)
            .map(|i| bound.ids[i])
            .ok_or_else(|| Error::Params(format!("no parameter named {}", name)))
    }

    fn block_weights(&self, bound: &BoundModel, stage: usize, block: usize) -> Result<BlockWeights> {
        let p = format!("encoder.stage{stage}.block{block}");
        let heads = (0..self.config.num_heads[stage])
            .map(|h| {
                Ok(HeadWeights {
                    wq: self.pid(bound, &format!("{p}.attn.head{h}.wq"))?,
                    wk: self.pid(bound, &format!("{p}.attn.head{h}.wk"))?,
                    wv: self.pid(bound, &format!("{p}.attn.head{h}.wv"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sr_mix = if self.config.sr_ratios[stage] > 1 {
            Some(self.pid(bound, &format!("{p}.attn.sr.weight"))?)
        } else {
            None
        };
        Ok(BlockWeights {
            norm1_gamma: self.pid(bound, &format!("{p}.norm1.gamma"))?,
            norm1_beta: self.pid(bound, &format!("{p}.norm1.beta"))?,
            attn: AttnWeights {
                heads,
                wo: self.pid(bound, &format!("{p}.attn.wo"))?,
                sr_mix,
            },
            norm2_gamma: self.pid(bound, &format!("{p}.norm2.gamma"))?,
            norm2_beta: self.pid(bound, &format!("{p}.norm2.beta"))?,
            fc1_weight: self.pid(bound, &format!("{p}.ffn.fc1.weight"))?,
            fc1_bias: self.pid(bound, &format!("{p}.ffn.fc1.bias"))?,
            fc2_weight: self.pid(bound, &format!("{p}.ffn.fc2.weight"))?,
            fc2_bias: self.pid(bound, &format!("{p}.ffn.fc2.bias"))?,
        })
    }

    /// Runs all stages over a [3, H, W] image node; H and W must divide by
    /// the total stride and every stage grid by its reduction ratio.
    pub fn encoder_forward(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundModel,
        img: NodeId,
    ) -> Result<Vec<StageOut>> {
        let (c, h, w) = tape.value(img).dims3("encoder")?;
        if c != 3 {
            return Err(Error::InvalidShape {
                op: "encoder",
                shape: tape.shape(img).to_vec(),
                reason: "expected a 3-channel image".into(),
            });
        }
        let ts = self.config.total_stride();
        if h % ts != 0 || w % ts != 0 {
            return Err(Error::InvalidShape {
                op: "encoder",
                shape: vec![c, h, w],
                reason: format!("input sides must divide by the total stride {}", ts),
            });
        }
        let mut spatial = img;
        let mut outs = Vec::with_capacity(self.config.num_stages);
        for i in 0..self.config.num_stages {
            let d = self.config.embed_dims[i];
            let conv = tape.conv2d(
                spatial,
                self.pid(bound, &format!("encoder.stage{i}.embed.weight"))?,
                self.pid(bound, &format!("encoder.stage{i}.embed.bias"))?,
                self.config.patch_kernels[i],
                self.config.patch_strides[i],
                self.config.patch_pads[i],
            )?;
            let (_, sh, sw) = tape.value(conv).dims3("encoder")?;
            let seq = tape.reshape(conv, vec![d, sh * sw])?;
            let mut tokens = tape.transpose(seq)?;
            for j in 0..self.config.depths[i] {
                let weights = self.block_weights(bound, i, j)?;
                tokens =
                    transformer_block(tape, tokens, &weights, self.config.sr_ratios[i], (sh, sw))?;
            }
            outs.push(StageOut {
                tokens,
                h: sh,
                w: sw,
            });
            if i + 1 < self.config.num_stages {
                let tr = tape.transpose(tokens)?;
                spatial = tape.reshape(tr, vec![d, sh, sw])?;
            }
        }
        Ok(outs)
    }

    /// All-MLP head: project every stage to the decoder width, resize to the
    /// stage-one grid (align_corners = false), concatenate, fuse, classify,
    /// and resize to the requested output size.
    pub fn decode_head_forward(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundModel,
        stages: &[StageOut],
        out_hw: (usize, usize),
    ) -> Result<NodeId> {
        if stages.len() != self.config.num_stages {
            return Err(Error::InvalidShape {
                op: "decode_head",
                shape: vec![stages.len()],
                reason: format!("expected {} stage features", self.config.num_stages),
            });
        }
        let dd = self.config.decoder_dim;
        let (h0, w0) = (stages[0].h, stages[0].w);
        let mut projected = Vec::with_capacity(stages.len());
        for (i, st) in stages.iter().enumerate() {
            let p = tape.matmul(st.tokens, self.pid(bound, &format!("decoder.proj{i}.weight"))?)?;
            let p = tape.add_bias(p, self.pid(bound, &format!("decoder.proj{i}.bias"))?)?;
            let tok = if (st.h, st.w) == (h0, w0) {
                p
            } else {
                let tr = tape.transpose(p)?;
                let sp = tape.reshape(tr, vec![dd, st.h, st.w])?;
                let up = tape.bilinear_resize(sp, h0, w0, false)?;
                let seq = tape.reshape(up, vec![dd, h0 * w0])?;
                tape.transpose(seq)?
            };
            projected.push(tok);
        }
        let cat = tape.concat_cols(&projected)?;
        let fused = tape.matmul(cat, self.pid(bound, "decoder.fuse.weight")?)?;
        let fused = tape.add_bias(fused, self.pid(bound, "decoder.fuse.bias")?)?;
        let logits = tape.matmul(fused, self.pid(bound, "decoder.classifier.weight")?)?;
        let logits = tape.add_bias(logits, self.pid(bound, "decoder.classifier.bias")?)?;
        let tr = tape.transpose(logits)?;
        let sp = tape.reshape(tr, vec![self.config.num_classes, h0, w0])?;
        tape.bilinear_resize(sp, out_hw.0, out_hw.1, false)
    }

    /// Full forward: [3, H, W] image node to [2, H, W] logits.
    pub fn forward(&self, tape: &mut Tape<S>, bound: &BoundModel, img: NodeId) -> Result<NodeId> {
        let (_, h, w) = tape.value(img).dims3("model_forward")?;
        let stages = self.encoder_forward(tape, bound, img)?;
        self.decode_head_forward(tape, bound, &stages, (h, w))
    }

    /// Inference convenience: logits tensor without gradient bookkeeping.
    pub fn forward_logits(&self, img: &Tensor<S>) -> Result<Tensor<S>> {
        let mut tape = Tape::inference();
        let bound = self.bind(&mut tape)?;
        let id = tape.leaf(img.clone())?;
        let out = self.forward(&mut tape, &bound, id)?;
        Ok(tape.value(out).clone())
    }

    /// Argmax over the two channels; ties go to background.
    pub fn predict(&self, img: &Tensor<S>) -> Result<Mask> {
        let logits = self.forward_logits(img)?;
        logits_to_mask(&logits)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(self.config.clone(), &self.params)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let params = ckpt.to_param_set::<S>()?;
        Model::from_parts(ckpt.config.clone(), params)
    }
}

/// Collapses [2, H, W] logits to a binary mask; channel 1 wins only when
/// strictly larger, so a tie stays background.
pub fn logits_to_mask<S: Scalar>(logits: &Tensor<S>) -> Result<Mask> {
    let (c, h, w) = logits.dims3("logits_to_mask")?;
    if c != 2 {
        return Err(Error::InvalidShape {
            op: "logits_to_mask",
            shape: logits.shape().to_vec(),
            reason: "expected two channels".into(),
        });
    }
    let data = logits.data();
    let plane = h * w;
    Mask::new(
        w,
        h,
        (0..plane)
            .map(|p| u8::from(data[plane + p] > data[p]))
            .collect(),
    )
}
