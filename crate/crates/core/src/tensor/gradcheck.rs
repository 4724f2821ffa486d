//! Gradient checking. Analytic gradients from the tape are compared against
//! central finite differences computed by an independent code path, in f64
//! first and then again with the same graph rebuilt in f32.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NodeId, Tape, Tensor};
use crate::error::Result;
use crate::scalar::{from_f64, to_f64, Scalar};

/// Central-difference gradient of a scalar function of one tensor.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor<f64>, h: f64) -> Result<Tensor<f64>>
where
    F: FnMut(&Tensor<f64>) -> Result<f64>,
{
    let mut probe = x.clone();
    let mut grad = vec![0.0f64; x.numel()];
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Tensor::new(x.shape().to_vec(), grad)
}

/// Mixed relative/absolute discrepancy: |a - b| / max(|a|, |b|, 1).
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// One randomly sized instance of an operation under test.
#[derive(Clone, Debug)]
pub enum OpScenario {
    MatMul { m: usize, k: usize, n: usize },
    Transpose { r: usize, c: usize },
    Reshape { r: usize, c: usize },
    Add { shape: Vec<usize> },
    Mul { shape: Vec<usize> },
    Scale { shape: Vec<usize>, c: f64 },
    AddBias { n: usize, d: usize },
    ConcatCols { rows: usize, widths: Vec<usize> },
    SoftmaxRows { rows: usize, n: usize },
    LayerNorm { rows: usize, d: usize },
    Gelu { n: usize },
    Conv2d { c: usize, h: usize, w: usize, c_out: usize, k: usize, stride: usize, pad: usize },
    BilinearResize { c: usize, h: usize, w: usize, oh: usize, ow: usize },
    BlockMeanPool { gh: usize, gw: usize, d: usize, r: usize },
    Sum { n: usize },
    CrossEntropy { n: usize, targets: Vec<u8>, weighted: bool },
}

pub const OP_KINDS: usize = 16;

impl OpScenario {
    pub fn name(&self) -> &'static str {
        match self {
            OpScenario::MatMul { .. } => "matmul",
            OpScenario::Transpose { .. } => "transpose",
            OpScenario::Reshape { .. } => "reshape",
            OpScenario::Add { .. } => "add",
            OpScenario::Mul { .. } => "mul",
            OpScenario::Scale { .. } => "scale",
            OpScenario::AddBias { .. } => "add_bias",
            OpScenario::ConcatCols { .. } => "concat_cols",
            OpScenario::SoftmaxRows { .. } => "softmax",
            OpScenario::LayerNorm { .. } => "layer_norm",
            OpScenario::Gelu { .. } => "gelu",
            OpScenario::Conv2d { .. } => "conv2d",
            OpScenario::BilinearResize { .. } => "bilinear_resize",
            OpScenario::BlockMeanPool { .. } => "block_mean_pool",
            OpScenario::Sum { .. } => "sum",
            OpScenario::CrossEntropy { .. } => "cross_entropy",
        }
    }

    /// Random scenario of the given kind with every axis at most 8.
    pub fn sample(kind: usize, rng: &mut impl Rng) -> OpScenario {
        let d8 = |rng: &mut dyn rand::RngCore| rng.gen_range(1..=8usize);
        match kind {
            0 => OpScenario::MatMul {
                m: rng.gen_range(1..=8),
                k: rng.gen_range(1..=8),
                n: rng.gen_range(1..=8),
            },
            1 => OpScenario::Transpose { r: d8(rng), c: d8(rng) },
            2 => OpScenario::Reshape { r: d8(rng), c: d8(rng) },
            3 => OpScenario::Add { shape: vec![d8(rng), d8(rng)] },
            4 => OpScenario::Mul { shape: vec![d8(rng), d8(rng)] },
            5 => OpScenario::Scale {
                shape: vec![d8(rng), d8(rng)],
                c: rng.gen_range(-2.0..2.0),
            },
            6 => OpScenario::AddBias { n: d8(rng), d: d8(rng) },
            7 => {
                let parts = rng.gen_range(1..=3);
                OpScenario::ConcatCols {
                    rows: d8(rng),
                    widths: (0..parts).map(|_| rng.gen_range(1..=4)).collect(),
                }
            }
            8 => OpScenario::SoftmaxRows { rows: d8(rng), n: rng.gen_range(2..=8) },
            9 => OpScenario::LayerNorm { rows: d8(rng), d: rng.gen_range(4..=8) },
            10 => OpScenario::Gelu { n: d8(rng) },
            11 => {
                let k = rng.gen_range(1..=3usize);
                OpScenario::Conv2d {
                    c: rng.gen_range(1..=3),
                    h: rng.gen_range(k..=8),
                    w: rng.gen_range(k..=8),
                    c_out: rng.gen_range(1..=4),
                    k,
                    stride: rng.gen_range(1..=2),
                    pad: rng.gen_range(0..=1),
                }
            }
            12 => OpScenario::BilinearResize {
                c: rng.gen_range(1..=3),
                h: rng.gen_range(1..=8),
                w: rng.gen_range(1..=8),
                oh: rng.gen_range(1..=8),
                ow: rng.gen_range(1..=8),
            },
            13 => {
                let r = rng.gen_range(1..=2usize);
                OpScenario::BlockMeanPool {
                    gh: r * rng.gen_range(1..=3),
                    gw: r * rng.gen_range(1..=3),
                    d: rng.gen_range(1..=4),
                    r,
                }
            }
            14 => OpScenario::Sum { n: d8(rng) },
            15 => {
                let n = rng.gen_range(1..=8usize);
                OpScenario::CrossEntropy {
                    n,
                    targets: (0..n).map(|_| rng.gen_range(0..=1u8)).collect(),
                    weighted: rng.gen_bool(0.5),
                }
            }
            _ => unreachable!("unknown op kind"),
        }
    }

    /// Differentiable inputs for the scenario. Layer norm inputs get a
    /// deterministic spread added so row variance stays well away from zero
    /// and the finite-difference probe remains stable.
    pub fn sample_inputs(&self, rng: &mut impl Rng) -> Vec<Tensor<f64>> {
        let mut uniform = |shape: Vec<usize>| {
            Tensor::from_fn(shape, |_| rng.gen_range(-1.5..1.5))
        };
        match self {
            OpScenario::MatMul { m, k, n } => vec![uniform(vec![*m, *k]), uniform(vec![*k, *n])],
            OpScenario::Transpose { r, c } | OpScenario::Reshape { r, c } => {
                vec![uniform(vec![*r, *c])]
            }
            OpScenario::Add { shape } | OpScenario::Mul { shape } => {
                vec![uniform(shape.clone()), uniform(shape.clone())]
            }
            OpScenario::Scale { shape, .. } => vec![uniform(shape.clone())],
            OpScenario::AddBias { n, d } => vec![uniform(vec![*n, *d]), uniform(vec![*d])],
            OpScenario::ConcatCols { rows, widths } => widths
                .iter()
                .map(|&w| uniform(vec![*rows, w]))
                .collect(),
            OpScenario::SoftmaxRows { rows, n } => vec![uniform(vec![*rows, *n])],
            OpScenario::LayerNorm { rows, d } => {
                let mut x = uniform(vec![*rows, *d]);
                for (i, v) in x.data_mut().iter_mut().enumerate() {
                    let j = i % d;
                    *v = *v * 0.2 + (j as f64 / (*d - 1) as f64) * 3.0 - 1.5;
                }
                vec![x, uniform(vec![*d]), uniform(vec![*d])]
            }
            OpScenario::Gelu { n } | OpScenario::Sum { n } => vec![uniform(vec![*n])],
            OpScenario::Conv2d { c, h, w, c_out, k, .. } => vec![
                uniform(vec![*c, *h, *w]),
                uniform(vec![c * k * k, *c_out]),
                uniform(vec![*c_out]),
            ],
            OpScenario::BilinearResize { c, h, w, .. } => vec![uniform(vec![*c, *h, *w])],
            OpScenario::BlockMeanPool { gh, gw, d, .. } => vec![uniform(vec![gh * gw, *d])],
            OpScenario::CrossEntropy { n, .. } => vec![uniform(vec![2, *n])],
        }
    }

    /// Builds the op over leaf ids and reduces to a scalar loss.
    pub fn build<S: Scalar>(&self, tape: &mut Tape<S>, ids: &[NodeId]) -> Result<NodeId> {
        let out = match self {
            OpScenario::MatMul { .. } => tape.matmul(ids[0], ids[1])?,
            OpScenario::Transpose { .. } => tape.transpose(ids[0])?,
            OpScenario::Reshape { r, c } => tape.reshape(ids[0], vec![*c, *r])?,
            OpScenario::Add { .. } => tape.add(ids[0], ids[1])?,
            OpScenario::Mul { .. } => tape.mul(ids[0], ids[1])?,
            OpScenario::Scale { c, .. } => tape.scale(ids[0], from_f64(*c))?,
            OpScenario::AddBias { .. } => tape.add_bias(ids[0], ids[1])?,
            OpScenario::ConcatCols { .. } => tape.concat_cols(ids)?,
            OpScenario::SoftmaxRows { .. } => tape.softmax_rows(ids[0])?,
            OpScenario::LayerNorm { .. } => tape.layer_norm(ids[0], ids[1], ids[2], 1e-6)?,
            OpScenario::Gelu { .. } => tape.gelu(ids[0])?,
            OpScenario::Conv2d { k, stride, pad, .. } => {
                tape.conv2d(ids[0], ids[1], ids[2], *k, *stride, *pad)?
            }
            OpScenario::BilinearResize { oh, ow, .. } => {
                tape.bilinear_resize(ids[0], *oh, *ow, false)?
            }
            OpScenario::BlockMeanPool { gh, gw, r, .. } => {
                tape.block_mean_pool(ids[0], *gh, *gw, *r)?
            }
            OpScenario::Sum { .. } => tape.sum(ids[0])?,
            OpScenario::CrossEntropy { n, targets, weighted } => {
                let w: Option<Vec<S>> = weighted.then(|| {
                    (0..*n).map(|i| from_f64(pixel_weight(i))).collect()
                });
                return tape.softmax_cross_entropy(ids[0], targets, w.as_deref());
            }
        };
        weighted_sum_loss(tape, out)
    }
}

/// Deterministic positive pixel weights with one zero in every four, so the
/// backward rule for excluded pixels is exercised too.
fn pixel_weight(i: usize) -> f64 {
    match i % 4 {
        0 => 1.0,
        1 => 0.5,
        2 => 0.0,
        _ => 1.5,
    }
}

/// Reduces a node to a scalar through a fixed pattern of mixed-sign weights,
/// so every output element feeds the loss with a distinct coefficient.
fn weighted_sum_loss<S: Scalar>(tape: &mut Tape<S>, out: NodeId) -> Result<NodeId> {
    let shape = tape.shape(out).to_vec();
    let n = tape.value(out).numel();
    let w: Vec<S> = (0..n)
        .map(|i| {
            let v = (i.wrapping_mul(2654435761) % 997) as f64 / 997.0;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            from_f64(sign * (0.4 + 0.8 * v))
        })
        .collect();
    let wid = tape.leaf_from(shape, w)?;
    let prod = tape.mul(out, wid)?;
    tape.sum(prod)
}

/// Worst relative errors over one scenario: analytic f64 vs finite
/// differences, and analytic f32 vs the same finite differences.
pub fn check_scenario(sc: &OpScenario, inputs: &[Tensor<f64>]) -> Result<(f64, f64)> {
    // analytic, f64
    let mut tape = Tape::<f64>::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .map(|t| tape.leaf(t.clone()))
        .collect::<Result<_>>()?;
    let loss = sc.build(&mut tape, &ids)?;
    tape.backward(loss)?;
    let ad64: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| tape.grad(id).expect("input reachable from loss").to_vec())
        .collect();

    // analytic, f32, same graph
    let mut tape32 = Tape::<f32>::new();
    let ids32: Vec<NodeId> = inputs
        .iter()
        .map(|t| tape32.leaf(t.cast()))
        .collect::<Result<_>>()?;
    let loss32 = sc.build(&mut tape32, &ids32)?;
    tape32.backward(loss32)?;
    let ad32: Vec<Vec<f32>> = ids32
        .iter()
        .map(|&id| tape32.grad(id).expect("input reachable from loss").to_vec())
        .collect();

    let mut err64 = 0.0f64;
    let mut err32 = 0.0f64;
    for (i, x) in inputs.iter().enumerate() {
        let fd = finite_diff_grad(
            |probe| {
                let mut t = Tape::<f64>::new();
                let ids: Vec<NodeId> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, orig)| t.leaf(if j == i { probe.clone() } else { orig.clone() }))
                    .collect::<Result<_>>()?;
                let l = sc.build(&mut t, &ids)?;
                t.value(l).item()
            },
            x,
            1e-5,
        )?;
        for (j, &fdv) in fd.data().iter().enumerate() {
            err64 = err64.max(relative_error(ad64[i][j], fdv));
            err32 = err32.max(relative_error(to_f64(ad32[i][j]), fdv));
        }
    }
    Ok((err64, err32))
}

#[derive(Clone, Debug)]
pub struct GradReport {
    pub op: String,
    pub cases: usize,
    pub max_err_f64: f64,
    pub max_err_f32: f64,
}

/// Runs `cases` random instances of every op kind and reports the worst
/// discrepancy per op in both precisions.
pub fn check_all_ops(cases: usize, seed: u64) -> Result<Vec<GradReport>> {
    let mut reports = Vec::with_capacity(OP_KINDS);
    for kind in 0..OP_KINDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(kind as u64 * 7919));
        let mut max64 = 0.0f64;
        let mut max32 = 0.0f64;
        let mut name = String::new();
        for _ in 0..cases {
            let sc = OpScenario::sample(kind, &mut rng);
            name = sc.name().to_string();
            let inputs = sc.sample_inputs(&mut rng);
            let (e64, e32) = check_scenario(&sc, &inputs)?;
            max64 = max64.max(e64);
            max32 = max32.max(e32);
        }
        reports.push(GradReport {
            op: name,
            cases,
            max_err_f64: max64,
            max_err_f32: max32,
        });
    }
    Ok(reports)
}
