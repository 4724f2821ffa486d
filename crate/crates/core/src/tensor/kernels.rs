//! Raw dense kernels shared by forward and backward passes. All matmul
//! variants accumulate into `out` so backward can reuse them directly on
//! gradient buffers.

use crate::scalar::{from_f64, to_f64, Scalar};

/// out[m,n] += a[m,k] . b[k,n]
pub fn matmul_acc<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize, out: &mut [S]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// out[m,k] += a[m,n] . b[k,n]^T
pub fn matmul_nt_acc<S: Scalar>(a: &[S], b: &[S], m: usize, n: usize, k: usize, out: &mut [S]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (p, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = S::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o += acc;
        }
    }
}

/// out[k,n] += a[m,k]^T . b[m,n]
pub fn matmul_tn_acc<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize, out: &mut [S]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// Row-wise softmax with max subtraction, so large logits cannot overflow.
pub fn softmax_rows<S: Scalar>(x: &[S], rows: usize, n: usize, out: &mut [S]) {
    for r in 0..rows {
        let xs = &x[r * n..(r + 1) * n];
        let os = &mut out[r * n..(r + 1) * n];
        let mut m = xs[0];
        for &v in xs.iter() {
            if v > m {
                m = v;
            }
        }
        let mut sum = S::zero();
        for (o, &v) in os.iter_mut().zip(xs) {
            let e = (v - m).exp();
            *o = e;
            sum += e;
        }
        for o in os.iter_mut() {
            *o /= sum;
        }
    }
}

/// dx[r,:] += y[r,:] * (g[r,:] - <g[r,:], y[r,:]>)
pub fn softmax_rows_backward<S: Scalar>(y: &[S], g: &[S], rows: usize, n: usize, dx: &mut [S]) {
    for r in 0..rows {
        let ys = &y[r * n..(r + 1) * n];
        let gs = &g[r * n..(r + 1) * n];
        let ds = &mut dx[r * n..(r + 1) * n];
        let mut dot = S::zero();
        for (&yv, &gv) in ys.iter().zip(gs) {
            dot += yv * gv;
        }
        for ((d, &yv), &gv) in ds.iter_mut().zip(ys).zip(gs) {
            *d += yv * (gv - dot);
        }
    }
}

/// Normalizes each length-d slice to zero mean and unit variance (biased
/// variance estimate), then applies the affine pair.
pub fn layer_norm<S: Scalar>(x: &[S], gamma: &[S], beta: &[S], eps: S, d: usize, out: &mut [S]) {
    let inv_d = S::one() / from_f64::<S>(d as f64);
    for (xs, os) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        let mut mean = S::zero();
        for &v in xs {
            mean += v;
        }
        mean *= inv_d;
        let mut var = S::zero();
        for &v in xs {
            let c = v - mean;
            var += c * c;
        }
        var *= inv_d;
        let inv_sigma = S::one() / (var + eps).sqrt();
        for ((o, &v), (&g, &b)) in os.iter_mut().zip(xs).zip(gamma.iter().zip(beta)) {
            *o = (v - mean) * inv_sigma * g + b;
        }
    }
}

pub fn layer_norm_backward<S: Scalar>(
    x: &[S],
    gamma: &[S],
    eps: S,
    d: usize,
    g: &[S],
    dx: &mut [S],
    dgamma: &mut [S],
    dbeta: &mut [S],
) {
    let inv_d = S::one() / from_f64::<S>(d as f64);
    for ((xs, gs), ds) in x
        .chunks_exact(d)
        .zip(g.chunks_exact(d))
        .zip(dx.chunks_exact_mut(d))
    {
        let mut mean = S::zero();
        for &v in xs {
            mean += v;
        }
        mean *= inv_d;
        let mut var = S::zero();
        for &v in xs {
            let c = v - mean;
            var += c * c;
        }
        var *= inv_d;
        let inv_sigma = S::one() / (var + eps).sqrt();

        // gi = upstream scaled by gamma; dx needs its mean and its
        // correlation with the normalized input.
        let mut mean_gi = S::zero();
        let mut mean_gi_xhat = S::zero();
        for (j, (&gv, &xv)) in gs.iter().zip(xs).enumerate() {
            let xhat = (xv - mean) * inv_sigma;
            let gi = gv * gamma[j];
            mean_gi += gi;
            mean_gi_xhat += gi * xhat;
            dgamma[j] += gv * xhat;
            dbeta[j] += gv;
        }
        mean_gi *= inv_d;
        mean_gi_xhat *= inv_d;
        for (j, (dv, (&gv, &xv))) in ds.iter_mut().zip(gs.iter().zip(xs)).enumerate() {
            let xhat = (xv - mean) * inv_sigma;
            let gi = gv * gamma[j];
            *dv += inv_sigma * (gi - mean_gi - xhat * mean_gi_xhat);
        }
    }
}

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.3989422804014327;

/// Standard normal CDF.
#[inline]
fn phi<S: Scalar>(x: S) -> S {
    let half = from_f64::<S>(0.5);
    half * (S::one() + (x * from_f64::<S>(INV_SQRT_2)).erf())
}

/// Exact GELU x * Phi(x), no tanh shortcut.
#[inline]
pub fn gelu<S: Scalar>(x: S) -> S {
    x * phi(x)
}

/// d/dx of x * Phi(x) = Phi(x) + x * pdf(x).
#[inline]
pub fn gelu_derivative<S: Scalar>(x: S) -> S {
    let pdf = from_f64::<S>(INV_SQRT_2PI) * (-x * x * from_f64::<S>(0.5)).exp();
    phi(x) + x * pdf
}

/// Mean loss of -ln p(true class) under a 2-class softmax over channel 0/1
/// logits, with per-pixel weights. Probabilities are clamped to 1e-12 before
/// the log. Returns (loss, p1 per pixel, weight sum); loss math runs in f64.
pub fn softmax_xent2<S: Scalar>(
    logits: &[S],
    targets: &[u8],
    weights: &[S],
) -> (f64, Vec<S>, f64) {
    let n = targets.len();
    debug_assert_eq!(logits.len(), 2 * n);
    debug_assert_eq!(weights.len(), n);
    let mut total = 0.0f64;
    let mut wsum = 0.0f64;
    let mut p1 = vec![S::zero(); n];
    for i in 0..n {
        let l0 = to_f64(logits[i]);
        let l1 = to_f64(logits[n + i]);
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        let z = e0 + e1;
        let prob1 = e1 / z;
        p1[i] = from_f64(prob1);
        let w = to_f64(weights[i]);
        if w != 0.0 {
            let p_true = if targets[i] == 1 { prob1 } else { e0 / z };
            total += -p_true.max(1e-12).ln() * w;
            wsum += w;
        }
    }
    (total / wsum, p1, wsum)
}
