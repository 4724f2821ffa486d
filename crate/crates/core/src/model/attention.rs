//! Attention ops: scaled dot-product attention, key/value spatial reduction,
//! and the multi-head form with per-head projection matrices.

use crate::error::{Error, Result};
use crate::scalar::{from_f64, Scalar};
use crate::tensor::{NodeId, Tape};

/// softmax(Q Kᵀ / sqrt(d_k)) V, plus the attention matrix for probing.
pub fn scaled_dot_attention_probed<S: Scalar>(
    tape: &mut Tape<S>,
    q: NodeId,
    k: NodeId,
    v: NodeId,
) -> Result<(NodeId, NodeId)> {
    let (_, d_k) = tape.value(q).dims2("attention")?;
    let (m_k, d_k2) = tape.value(k).dims2("attention")?;
    let (m_v, _) = tape.value(v).dims2("attention")?;
    if d_k != d_k2 {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: tape.shape(q).to_vec(),
            rhs: tape.shape(k).to_vec(),
        });
    }
    if m_k != m_v {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: tape.shape(k).to_vec(),
            rhs: tape.shape(v).to_vec(),
        });
    }
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scaled = tape.scale(scores, from_f64(1.0 / (d_k as f64).sqrt()))?;
    let attn = tape.softmax_rows(scaled)?;
    let out = tape.matmul(attn, v)?;
    Ok((out, attn))
}

pub fn scaled_dot_attention<S: Scalar>(
    tape: &mut Tape<S>,
    q: NodeId,
    k: NodeId,
    v: NodeId,
) -> Result<NodeId> {
    scaled_dot_attention_probed(tape, q, k, v).map(|(out, _)| out)
}

/// Shortens a (h·w)-token sequence by the reduction factor: mean over r x r
/// token blocks, then a learned d x d mixing matrix. `r = 1` is the identity
/// and uses no parameters.
pub fn spatial_reduction<S: Scalar>(
    tape: &mut Tape<S>,
    x: NodeId,
    r: usize,
    spatial: (usize, usize),
    mix: Option<NodeId>,
) -> Result<NodeId> {
    let (h, w) = spatial;
    let (n, _) = tape.value(x).dims2("spatial_reduction")?;
    if n != h * w {
        return Err(Error::InvalidShape {
            op: "spatial_reduction",
            shape: tape.shape(x).to_vec(),
            reason: format!("token count mismatches {}x{} grid", h, w),
        });
    }
    if r == 1 {
        return Ok(x);
    }
    if h % r != 0 || w % r != 0 {
        return Err(Error::InvalidShape {
            op: "spatial_reduction",
            shape: vec![h, w],
            reason: format!("reduction {} must divide both grid sides", r),
        });
    }
    let pooled = tape.block_mean_pool(x, h, w, r)?;
    let mix = mix.ok_or_else(|| {
        Error::Params("spatial reduction with r > 1 needs its mixing matrix".into())
    })?;
    tape.matmul(pooled, mix)
}

/// Per-head projection matrices; keys and values are taken from the reduced
/// sequence.
#[derive(Clone, Debug)]
pub struct HeadWeights {
    pub wq: NodeId,
    pub wk: NodeId,
    pub wv: NodeId,
}

#[derive(Clone, Debug)]
pub struct AttnWeights {
    pub heads: Vec<HeadWeights>,
    pub wo: NodeId,
    pub sr_mix: Option<NodeId>,
}

/// Concat(head_1 .. head_k) W_O with head_i = Attention(x W_Qi, x_r W_Ki,
/// x_r W_Vi). Returns the per-head attention matrices alongside the output.
pub fn multi_head_attention_probed<S: Scalar>(
    tape: &mut Tape<S>,
    x: NodeId,
    weights: &AttnWeights,
    sr_ratio: usize,
    spatial: (usize, usize),
) -> Result<(NodeId, Vec<NodeId>)> {
    let (_, d) = tape.value(x).dims2("multi_head_attention")?;
    let heads = weights.heads.len();
    if heads == 0 || d % heads != 0 {
        return Err(Error::InvalidShape {
            op: "multi_head_attention",
            shape: tape.shape(x).to_vec(),
            reason: format!("dim {} not divisible into {} heads", d, heads),
        });
    }
    let x_r = spatial_reduction(tape, x, sr_ratio, spatial, weights.sr_mix)?;
    let mut outs = Vec::with_capacity(heads);
    let mut probes = Vec::with_capacity(heads);
    for hw in &weights.heads {
        let q = tape.matmul(x, hw.wq)?;
        let k = tape.matmul(x_r, hw.wk)?;
        let v = tape.matmul(x_r, hw.wv)?;
        let (out, attn) = scaled_dot_attention_probed(tape, q, k, v)?;
        outs.push(out);
        probes.push(attn);
    }
    let concat = tape.concat_cols(&outs)?;
    let out = tape.matmul(concat, weights.wo)?;
    Ok((out, probes))
}

pub fn multi_head_attention<S: Scalar>(
    tape: &mut Tape<S>,
    x: NodeId,
    weights: &AttnWeights,
    sr_ratio: usize,
    spatial: (usize, usize),
) -> Result<NodeId> {
    multi_head_attention_probed(tape, x, weights, sr_ratio, spatial).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn leaf(tape: &mut Tape<f64>, shape: Vec<usize>, data: Vec<f64>) -> NodeId {
        tape.leaf_from(shape, data).unwrap()
    }

    fn eye(tape: &mut Tape<f64>, n: usize) -> NodeId {
        let t = Tensor::from_fn(vec![n, n], |i| if i / n == i % n { 1.0 } else { 0.0 });
        tape.leaf(t).unwrap()
    }

    #[test]
    fn single_token_attention_passes_value_through() {
        let mut tape = Tape::<f64>::new();
        let q = leaf(&mut tape, vec![1, 1], vec![1.0]);
        let k = leaf(&mut tape, vec![1, 1], vec![1.0]);
        let v = leaf(&mut tape, vec![1, 1], vec![5.0]);
        let out = scaled_dot_attention(&mut tape, q, k, v).unwrap();
        assert_eq!(tape.data(out), &[5.0]);
    }

    #[test]
    fn identical_keys_average_values() {
        let mut tape = Tape::<f64>::new();
        let q = leaf(&mut tape, vec![2, 2], vec![0.3, -1.0, 2.0, 0.7]);
        let k = leaf(&mut tape, vec![3, 2], vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let v = leaf(&mut tape, vec![3, 2], vec![3.0, 0.0, 0.0, 6.0, 3.0, 3.0]);
        let out = scaled_dot_attention(&mut tape, q, k, v).unwrap();
        for row in tape.data(out).chunks_exact(2) {
            assert!((row[0] - 2.0).abs() < 1e-12);
            assert!((row[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_two_token_oracle() {
        // Q = K = V = I2: scores I2/sqrt(2), rows of softmax applied to I2.
        let mut tape = Tape::<f64>::new();
        let q = eye(&mut tape, 2);
        let k = eye(&mut tape, 2);
        let v = eye(&mut tape, 2);
        let out = scaled_dot_attention(&mut tape, q, k, v).unwrap();
        let a = (1.0 / 2.0f64.sqrt()).exp();
        let p_hi = a / (a + 1.0);
        let p_lo = 1.0 / (a + 1.0);
        let got = tape.data(out);
        for (g, e) in got.iter().zip([p_hi, p_lo, p_lo, p_hi]) {
            assert!((g - e).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn key_value_permutation_invariance() {
        let mut tape = Tape::<f64>::new();
        let q = leaf(&mut tape, vec![2, 3], vec![0.1, -0.4, 0.9, 1.2, 0.0, -0.3]);
        let kdata = vec![0.2, 0.5, -0.1, 1.0, -0.7, 0.3, 0.0, 0.8, -0.2, 0.4, 0.6, -0.5];
        let vdata = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let k = leaf(&mut tape, vec![4, 3], kdata.clone());
        let v = leaf(&mut tape, vec![4, 3], vdata.clone());
        let out = scaled_dot_attention(&mut tape, q, k, v).unwrap();
        let base = tape.data(out).to_vec();

        // rotate rows of K and V together
        let rot = |d: &[f64]| {
            let mut r = d[9..].to_vec();
            r.extend_from_slice(&d[..9]);
            r
        };
        let k2 = leaf(&mut tape, vec![4, 3], rot(&kdata));
        let v2 = leaf(&mut tape, vec![4, 3], rot(&vdata));
        let out2 = scaled_dot_attention(&mut tape, q, k2, v2).unwrap();
        for (a, b) in base.iter().zip(tape.data(out2)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn spatial_reduction_shapes_and_identity() {
        let mut tape = Tape::<f64>::new();
        let x = leaf(&mut tape, vec![16, 2], (0..32).map(|i| i as f64).collect());
        let same = spatial_reduction(&mut tape, x, 1, (4, 4), None).unwrap();
        assert_eq!(same, x);
        let mix = eye(&mut tape, 2);
        let red = spatial_reduction(&mut tape, x, 2, (4, 4), Some(mix)).unwrap();
        assert_eq!(tape.shape(red), &[4, 2]);
        let err = spatial_reduction(&mut tape, x, 3, (4, 4), Some(mix));
        assert!(err.is_err());
    }

    #[test]
    fn constant_input_identity_mixing_stays_constant() {
        let mut tape = Tape::<f64>::new();
        let x = leaf(&mut tape, vec![16, 2], vec![0.7; 32]);
        let mix = eye(&mut tape, 2);
        let red = spatial_reduction(&mut tape, x, 4, (4, 4), Some(mix)).unwrap();
        for &v in tape.data(red) {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn one_head_identity_projections_reduce_to_plain_attention() {
        let mut tape = Tape::<f64>::new();
        let xdata: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = leaf(&mut tape, vec![4, 2], xdata);
        let id2 = eye(&mut tape, 2);
        let weights = AttnWeights {
            heads: vec![HeadWeights { wq: id2, wk: id2, wv: id2 }],
            wo: id2,
            sr_mix: None,
        };
        let mha = multi_head_attention(&mut tape, x, &weights, 1, (2, 2)).unwrap();
        let plain = scaled_dot_attention(&mut tape, x, x, x).unwrap();
        for (a, b) in tape.data(mha).iter().zip(tape.data(plain)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn attention_rows_are_stochastic_per_head() {
        let mut tape = Tape::<f64>::new();
        let x = leaf(
            &mut tape,
            vec![4, 4],
            (0..16).map(|i| ((i * 7 % 5) as f64) * 0.4 - 0.8).collect(),
        );
        let mk = |tape: &mut Tape<f64>| {
            let t = Tensor::from_fn(vec![4, 2], |i| ((i * 13 % 7) as f64) * 0.1 - 0.3);
            tape.leaf(t).unwrap()
        };
        let weights = AttnWeights {
            heads: (0..2)
                .map(|_| HeadWeights {
                    wq: mk(&mut tape),
                    wk: mk(&mut tape),
                    wv: mk(&mut tape),
                })
                .collect(),
            wo: eye(&mut tape, 4),
            sr_mix: None,
        };
        let (_, probes) =
            multi_head_attention_probed(&mut tape, x, &weights, 1, (2, 2)).unwrap();
        assert_eq!(probes.len(), 2);
        for p in probes {
            for row in tape.data(p).chunks_exact(4) {
                assert!(row.iter().all(|&v| v >= 0.0));
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn head_count_must_divide_dim() {
        let mut tape = Tape::<f64>::new();
        let x = leaf(&mut tape, vec![4, 3], vec![0.0; 12]);
        let id3 = eye(&mut tape, 3);
        let weights = AttnWeights {
            heads: (0..2)
                .map(|_| HeadWeights { wq: id3, wk: id3, wv: id3 })
                .collect(),
            wo: id3,
            sr_mix: None,
        };
        assert!(multi_head_attention(&mut tape, x, &weights, 1, (2, 2)).is_err());
    }
}
