//! Bilinear resize with half-pixel centers (align_corners = false). The map
//! is linear in the pixel values, so the backward pass scatters each output
//! gradient onto its four taps with the same weights.

use crate::scalar::{from_f64, Scalar};

/// One axis tap: two source indices and the weight of the second.
#[derive(Clone, Copy, Debug)]
struct AxisTap {
    lo: usize,
    hi: usize,
    frac: f64,
}

/// Geometry of one resize, fixed at record time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResizeGeom {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub align_corners: bool,
}

fn axis_taps(n_in: usize, n_out: usize, align_corners: bool) -> Vec<AxisTap> {
    (0..n_out)
        .map(|i| {
            let src = if align_corners {
                if n_out == 1 {
                    0.0
                } else {
                    i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                }
            } else {
                // Half-pixel centers, clamped into the valid range so border
                // outputs replicate edge pixels.
                ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5)
                    .clamp(0.0, (n_in - 1) as f64)
            };
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(n_in - 1);
            AxisTap {
                lo,
                hi,
                frac: src - lo as f64,
            }
        })
        .collect()
}

pub fn bilinear_forward<S: Scalar>(x: &[S], g: &ResizeGeom, out: &mut [S]) {
    let ys = axis_taps(g.in_h, g.out_h, g.align_corners);
    let xs = axis_taps(g.in_w, g.out_w, g.align_corners);
    for c in 0..g.channels {
        let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        let out_plane = &mut out[c * g.out_h * g.out_w..(c + 1) * g.out_h * g.out_w];
        for (oy, ty) in ys.iter().enumerate() {
            let wy1 = from_f64::<S>(ty.frac);
            let wy0 = S::one() - wy1;
            for (ox, tx) in xs.iter().enumerate() {
                let wx1 = from_f64::<S>(tx.frac);
                let wx0 = S::one() - wx1;
                let v00 = plane[ty.lo * g.in_w + tx.lo];
                let v01 = plane[ty.lo * g.in_w + tx.hi];
                let v10 = plane[ty.hi * g.in_w + tx.lo];
                let v11 = plane[ty.hi * g.in_w + tx.hi];
                out_plane[oy * g.out_w + ox] =
                    wy0 * (wx0 * v00 + wx1 * v01) + wy1 * (wx0 * v10 + wx1 * v11);
            }
        }
    }
}

pub fn bilinear_backward_acc<S: Scalar>(grad_out: &[S], g: &ResizeGeom, dx: &mut [S]) {
    let ys = axis_taps(g.in_h, g.out_h, g.align_corners);
    let xs = axis_taps(g.in_w, g.out_w, g.align_corners);
    for c in 0..g.channels {
        let g_plane = &grad_out[c * g.out_h * g.out_w..(c + 1) * g.out_h * g.out_w];
        let dx_plane = &mut dx[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for (oy, ty) in ys.iter().enumerate() {
            let wy1 = from_f64::<S>(ty.frac);
            let wy0 = S::one() - wy1;
            for (ox, tx) in xs.iter().enumerate() {
                let wx1 = from_f64::<S>(tx.frac);
                let wx0 = S::one() - wx1;
                let gv = g_plane[oy * g.out_w + ox];
                dx_plane[ty.lo * g.in_w + tx.lo] += wy0 * wx0 * gv;
                dx_plane[ty.lo * g.in_w + tx.hi] += wy0 * wx1 * gv;
                dx_plane[ty.hi * g.in_w + tx.lo] += wy1 * wx0 * gv;
                dx_plane[ty.hi * g.in_w + tx.hi] += wy1 * wx1 * gv;
            }
        }
    }
}
