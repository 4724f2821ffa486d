//! im2col / col2im for strided 2-D convolution. Convolution itself is lowered
//! to im2col followed by a matmul, so its gradient falls out of the matmul
//! rule plus the scatter-add below.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Geometry of one conv lowering, fixed at record time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(
        in_channels: usize,
        in_h: usize,
        in_w: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::InvalidShape {
                op: "conv2d",
                shape: vec![kernel, stride],
                reason: "kernel and stride must be positive".into(),
            });
        }
        let span = in_h + 2 * pad;
        let span_w = in_w + 2 * pad;
        if span < kernel || span_w < kernel {
            return Err(Error::InvalidShape {
                op: "conv2d",
                shape: vec![in_channels, in_h, in_w],
                reason: format!("kernel {} exceeds padded input {}x{}", kernel, span, span_w),
            });
        }
        Ok(ConvGeom {
            in_channels,
            in_h,
            in_w,
            kernel,
            stride,
            pad,
            out_h: (span - kernel) / stride + 1,
            out_w: (span_w - kernel) / stride + 1,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn out_positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Lays out every kernel-sized window as one row: out is
/// [out_h * out_w, c * k * k], zero padding outside the input.
pub fn im2col<S: Scalar>(x: &[S], g: &ConvGeom, out: &mut [S]) {
    let k = g.kernel;
    let cols = g.patch_len();
    debug_assert_eq!(x.len(), g.in_channels * g.in_h * g.in_w);
    debug_assert_eq!(out.len(), g.out_positions() * cols);
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = (oy * g.out_w + ox) * cols;
            for c in 0..g.in_channels {
                let plane = c * g.in_h * g.in_w;
                for ky in 0..k {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    for kx in 0..k {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        let dst = row + c * k * k + ky * k + kx;
                        out[dst] = if iy >= 0
                            && (iy as usize) < g.in_h
                            && ix >= 0
                            && (ix as usize) < g.in_w
                        {
                            x[plane + iy as usize * g.in_w + ix as usize]
                        } else {
                            S::zero()
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: scatter-adds column gradients back onto the image.
pub fn col2im_acc<S: Scalar>(g_cols: &[S], g: &ConvGeom, dx: &mut [S]) {
    let k = g.kernel;
    let cols = g.patch_len();
    debug_assert_eq!(dx.len(), g.in_channels * g.in_h * g.in_w);
    debug_assert_eq!(g_cols.len(), g.out_positions() * cols);
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = (oy * g.out_w + ox) * cols;
            for c in 0..g.in_channels {
                let plane = c * g.in_h * g.in_w;
                for ky in 0..k {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy as usize >= g.in_h {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix < 0 || ix as usize >= g.in_w {
                            continue;
                        }
                        dx[plane + iy as usize * g.in_w + ix as usize] +=
                            g_cols[row + c * k * k + ky * k + kx];
                    }
                }
            }
        }
    }
}
