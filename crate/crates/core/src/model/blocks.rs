//! Pre-norm transformer block: x + MHA(LN(x)), then + FFN(LN(.)) with a
//! two-layer GELU feed-forward.

use super::attention::{multi_head_attention, AttnWeights};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::{NodeId, Tape};

/// Epsilon of every layer norm in the model.
pub const LN_EPS: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BlockWeights {
    pub norm1_gamma: NodeId,
    pub norm1_beta: NodeId,
    pub attn: AttnWeights,
    pub norm2_gamma: NodeId,
    pub norm2_beta: NodeId,
    pub fc1_weight: NodeId,
    pub fc1_bias: NodeId,
    pub fc2_weight: NodeId,
    pub fc2_bias: NodeId,
}

pub fn transformer_block<S: Scalar>(
    tape: &mut Tape<S>,
    x: NodeId,
    weights: &BlockWeights,
    sr_ratio: usize,
    spatial: (usize, usize),
) -> Result<NodeId> {
    let normed = tape.layer_norm(x, weights.norm1_gamma, weights.norm1_beta, LN_EPS)?;
    let attended = multi_head_attention(tape, normed, &weights.attn, sr_ratio, spatial)?;
    let x = tape.add(x, attended)?;

    let normed = tape.layer_norm(x, weights.norm2_gamma, weights.norm2_beta, LN_EPS)?;
    let hidden = tape.matmul(normed, weights.fc1_weight)?;
    let hidden = tape.add_bias(hidden, weights.fc1_bias)?;
    let hidden = tape.gelu(hidden)?;
    let ffn = tape.matmul(hidden, weights.fc2_weight)?;
    let ffn = tape.add_bias(ffn, weights.fc2_bias)?;
    tape.add(x, ffn)
}
