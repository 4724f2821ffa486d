//! Arena tape. Every operation validates shapes, computes its output, checks
//! it is finite, and appends one record. `backward` walks records in reverse,
//! accumulating into per-node gradient buffers, so fan-out sums naturally.

use super::conv::{col2im_acc, im2col, ConvGeom};
use super::kernels;
use super::resize::{bilinear_backward_acc, bilinear_forward, ResizeGeom};
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{from_f64, Scalar};

pub type NodeId = usize;

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    Transpose {
        x: NodeId,
    },
    Reshape {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        c: S,
    },
    AddBias {
        x: NodeId,
        bias: NodeId,
    },
    ConcatCols {
        parts: Vec<NodeId>,
    },
    SoftmaxRows {
        x: NodeId,
        n: usize,
    },
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: S,
    },
    Gelu {
        x: NodeId,
    },
    Im2Col {
        x: NodeId,
        geom: ConvGeom,
    },
    BilinearResize {
        x: NodeId,
        geom: ResizeGeom,
    },
    BlockMeanPool {
        x: NodeId,
        grid_h: usize,
        grid_w: usize,
        r: usize,
    },
    Sum {
        x: NodeId,
    },
    /// 2-class softmax cross-entropy over [2, n] logits; saves p(class 1)
    /// from the forward pass for the backward rule (p - y).
    SoftmaxXent2 {
        logits: NodeId,
        targets: Vec<u8>,
        weights: Vec<S>,
        p1: Vec<S>,
        wsum: S,
    },
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Tensor<S>>,
    ops: Vec<Op<S>>,
    grad_enabled: bool,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    /// Tape that records operations for differentiation.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            ops: Vec::new(),
            grad_enabled: true,
        }
    }

    /// Forward-only tape: keeps values, records nothing, refuses `backward`.
    pub fn inference() -> Self {
        Tape {
            nodes: Vec::new(),
            ops: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Value of a node. Panics on an id not produced by this tape.
    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id]
    }

    pub fn data(&self, id: NodeId) -> &[S] {
        self.nodes[id].data()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id].shape()
    }

    /// Gradient of a node after `backward`; `None` if the node is not
    /// reachable from the loss.
    pub fn grad(&self, id: NodeId) -> Option<&[S]> {
        self.nodes[id].grad()
    }

    fn push(&mut self, t: Tensor<S>, op: Op<S>, name: &'static str) -> Result<NodeId> {
        if !t.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(t);
        self.ops.push(if self.grad_enabled { op } else { Op::Leaf });
        Ok(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor<S>) -> Result<NodeId> {
        self.push(t, Op::Leaf, "leaf")
    }

    pub fn leaf_from(&mut self, shape: Vec<usize>, data: Vec<S>) -> Result<NodeId> {
        let t = Tensor::new(shape, data)?;
        self.leaf(t)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.nodes[a].dims2("matmul")?;
        let (k2, n) = self.nodes[b].dims2("matmul")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.nodes[a].shape().to_vec(),
                rhs: self.nodes[b].shape().to_vec(),
            });
        }
        let mut out = vec![S::zero(); m * n];
        kernels::matmul_acc(self.nodes[a].data(), self.nodes[b].data(), m, k, n, &mut out);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b }, "matmul")
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.nodes[x].dims2("transpose")?;
        let xs = self.nodes[x].data();
        let mut out = vec![S::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xs[i * c + j];
            }
        }
        self.push(Tensor::new(vec![c, r], out)?, Op::Transpose { x }, "transpose")
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[x].numel() {
            return Err(Error::InvalidShape {
                op: "reshape",
                shape,
                reason: format!("input has {} elements", self.nodes[x].numel()),
            });
        }
        let t = Tensor::new(shape, self.nodes[x].data().to_vec())?;
        self.push(t, Op::Reshape { x }, "reshape")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.nodes[a].shape() != self.nodes[b].shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.nodes[a].shape().to_vec(),
                rhs: self.nodes[b].shape().to_vec(),
            });
        }
        let out: Vec<S> = self.nodes[a]
            .data()
            .iter()
            .zip(self.nodes[b].data())
            .map(|(&x, &y)| x + y)
            .collect();
        let t = Tensor::new(self.nodes[a].shape().to_vec(), out)?;
        self.push(t, Op::Add { a, b }, "add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.nodes[a].shape() != self.nodes[b].shape() {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: self.nodes[a].shape().to_vec(),
                rhs: self.nodes[b].shape().to_vec(),
            });
        }
        let out: Vec<S> = self.nodes[a]
            .data()
            .iter()
            .zip(self.nodes[b].data())
            .map(|(&x, &y)| x * y)
            .collect();
        let t = Tensor::new(self.nodes[a].shape().to_vec(), out)?;
        self.push(t, Op::Mul { a, b }, "mul")
    }

    pub fn scale(&mut self, x: NodeId, c: S) -> Result<NodeId> {
        if !c.is_finite() {
            return Err(Error::NonFinite { op: "scale" });
        }
        let out: Vec<S> = self.nodes[x].data().iter().map(|&v| v * c).collect();
        let t = Tensor::new(self.nodes[x].shape().to_vec(), out)?;
        self.push(t, Op::Scale { x, c }, "scale")
    }

    /// Adds a length-d bias row-wise to an [n, d] matrix.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (_, d) = self.nodes[x].dims2("add_bias")?;
        if self.nodes[bias].shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: self.nodes[x].shape().to_vec(),
                rhs: self.nodes[bias].shape().to_vec(),
            });
        }
        let bs = self.nodes[bias].data();
        let xs = self.nodes[x].data();
        let mut out = vec![S::zero(); xs.len()];
        for (orow, xrow) in out.chunks_exact_mut(d).zip(xs.chunks_exact(d)) {
            for ((o, &v), &b) in orow.iter_mut().zip(xrow).zip(bs) {
                *o = v + b;
            }
        }
        let t = Tensor::new(self.nodes[x].shape().to_vec(), out)?;
        self.push(t, Op::AddBias { x, bias }, "add_bias")
    }

    /// Concatenates [n, d_i] matrices along columns.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Tape("concat_cols of zero parts".into()));
        }
        let (rows, _) = self.nodes[parts[0]].dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.nodes[p].dims2("concat_cols")?;
            if r != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[parts[0]].shape().to_vec(),
                    rhs: self.nodes[p].shape().to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![S::zero(); rows * total];
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.nodes[p].data();
            for r in 0..rows {
                out[r * total + off..r * total + off + w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            off += w;
        }
        self.push(
            Tensor::new(vec![rows, total], out)?,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
            "concat_cols",
        )
    }

    /// Softmax over the last axis.
    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.nodes[x].shape().to_vec();
        let n = *shape.last().ok_or(Error::InvalidShape {
            op: "softmax",
            shape: vec![],
            reason: "rank-0 input".into(),
        })?;
        if n == 0 {
            return Err(Error::InvalidShape {
                op: "softmax",
                shape,
                reason: "empty last axis".into(),
            });
        }
        let rows = self.nodes[x].numel() / n;
        let mut out = vec![S::zero(); self.nodes[x].numel()];
        kernels::softmax_rows(self.nodes[x].data(), rows, n, &mut out);
        self.push(Tensor::new(shape, out)?, Op::SoftmaxRows { x, n }, "softmax")
    }

    /// Layer norm over the last axis with affine gamma/beta of that length.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let shape = self.nodes[x].shape().to_vec();
        let d = *shape.last().ok_or(Error::InvalidShape {
            op: "layer_norm",
            shape: vec![],
            reason: "rank-0 input".into(),
        })?;
        if self.nodes[gamma].shape() != [d] || self.nodes[beta].shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: shape,
                rhs: self.nodes[gamma].shape().to_vec(),
            });
        }
        let eps_s = from_f64::<S>(eps);
        let mut out = vec![S::zero(); self.nodes[x].numel()];
        kernels::layer_norm(
            self.nodes[x].data(),
            self.nodes[gamma].data(),
            self.nodes[beta].data(),
            eps_s,
            d,
            &mut out,
        );
        self.push(
            Tensor::new(shape, out)?,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps: eps_s,
            },
            "layer_norm",
        )
    }

    pub fn gelu(&mut self, x: NodeId) -> Result<NodeId> {
        let out: Vec<S> = self.nodes[x].data().iter().map(|&v| kernels::gelu(v)).collect();
        let t = Tensor::new(self.nodes[x].shape().to_vec(), out)?;
        self.push(t, Op::Gelu { x }, "gelu")
    }

    /// Window extraction for convolution: [c, h, w] to
    /// [out_h * out_w, c * k * k] with zero padding.
    pub fn im2col(&mut self, x: NodeId, kernel: usize, stride: usize, pad: usize) -> Result<NodeId> {
        let (c, h, w) = self.nodes[x].dims3("conv2d")?;
        let geom = ConvGeom::new(c, h, w, kernel, stride, pad)?;
        let mut out = vec![S::zero(); geom.out_positions() * geom.patch_len()];
        im2col(self.nodes[x].data(), &geom, &mut out);
        let t = Tensor::new(vec![geom.out_positions(), geom.patch_len()], out)?;
        self.push(t, Op::Im2Col { x, geom }, "im2col")
    }

    /// Strided convolution of [c, h, w] with a [c * k * k, c_out] weight
    /// matrix and [c_out] bias, returning [c_out, h', w']. Lowered to im2col
    /// plus matmul so the gradient follows from those rules.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        weight: NodeId,
        bias: NodeId,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let (c, h, w) = self.nodes[x].dims3("conv2d")?;
        let geom = ConvGeom::new(c, h, w, kernel, stride, pad)?;
        let (rows, c_out) = self.nodes[weight].dims2("conv2d")?;
        if rows != geom.patch_len() {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: vec![geom.patch_len()],
                rhs: self.nodes[weight].shape().to_vec(),
            });
        }
        let cols = self.im2col(x, kernel, stride, pad)?;
        let y = self.matmul(cols, weight)?;
        let y = self.add_bias(y, bias)?;
        let y = self.transpose(y)?;
        self.reshape(y, vec![c_out, geom.out_h, geom.out_w])
    }

    /// Bilinear resize of [c, h, w] to [c, out_h, out_w].
    pub fn bilinear_resize(
        &mut self,
        x: NodeId,
        out_h: usize,
        out_w: usize,
        align_corners: bool,
    ) -> Result<NodeId> {
        let (c, h, w) = self.nodes[x].dims3("bilinear_resize")?;
        if out_h == 0 || out_w == 0 {
            return Err(Error::InvalidShape {
                op: "bilinear_resize",
                shape: vec![out_h, out_w],
                reason: "empty output".into(),
            });
        }
        let geom = ResizeGeom {
            channels: c,
            in_h: h,
            in_w: w,
            out_h,
            out_w,
            align_corners,
        };
        let mut out = vec![S::zero(); c * out_h * out_w];
        bilinear_forward(self.nodes[x].data(), &geom, &mut out);
        self.push(
            Tensor::new(vec![c, out_h, out_w], out)?,
            Op::BilinearResize { x, geom },
            "bilinear_resize",
        )
    }

    /// Means over r x r blocks of a token grid: [grid_h * grid_w, d] to
    /// [(grid_h / r) * (grid_w / r), d]. Grid sides must divide by r.
    pub fn block_mean_pool(
        &mut self,
        x: NodeId,
        grid_h: usize,
        grid_w: usize,
        r: usize,
    ) -> Result<NodeId> {
        let (n, d) = self.nodes[x].dims2("block_mean_pool")?;
        if r == 0 || grid_h * grid_w != n || grid_h % r != 0 || grid_w % r != 0 {
            return Err(Error::InvalidShape {
                op: "block_mean_pool",
                shape: self.nodes[x].shape().to_vec(),
                reason: format!("grid {}x{} with block {}", grid_h, grid_w, r),
            });
        }
        let oh = grid_h / r;
        let ow = grid_w / r;
        let inv = S::one() / from_f64::<S>((r * r) as f64);
        let xs = self.nodes[x].data();
        let mut out = vec![S::zero(); oh * ow * d];
        for by in 0..oh {
            for bx in 0..ow {
                let o = (by * ow + bx) * d;
                for dy in 0..r {
                    for dx in 0..r {
                        let src = ((by * r + dy) * grid_w + (bx * r + dx)) * d;
                        for j in 0..d {
                            out[o + j] += xs[src + j];
                        }
                    }
                }
                for j in 0..d {
                    out[o + j] *= inv;
                }
            }
        }
        self.push(
            Tensor::new(vec![oh * ow, d], out)?,
            Op::BlockMeanPool {
                x,
                grid_h,
                grid_w,
                r,
            },
            "block_mean_pool",
        )
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let mut acc = S::zero();
        for &v in self.nodes[x].data() {
            acc += v;
        }
        self.push(Tensor::scalar(acc), Op::Sum { x }, "sum")
    }

    /// Weighted mean cross-entropy of [2, n] logits against n binary targets.
    /// `weights` defaults to all ones; zero-weight positions are excluded.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[u8],
        weights: Option<&[S]>,
    ) -> Result<NodeId> {
        let shape = self.nodes[logits].shape().to_vec();
        let n: usize = shape.iter().skip(1).product();
        if shape.first() != Some(&2) || n != targets.len() {
            return Err(Error::InvalidShape {
                op: "cross_entropy",
                shape,
                reason: format!("need [2, ...] logits matching {} targets", targets.len()),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t > 1) {
            return Err(Error::Tape(format!(
                "cross entropy target {} outside {{0, 1}}",
                bad
            )));
        }
        let w: Vec<S> = match weights {
            Some(ws) => {
                if ws.len() != n {
                    return Err(Error::ShapeMismatch {
                        op: "cross_entropy",
                        lhs: vec![n],
                        rhs: vec![ws.len()],
                    });
                }
                ws.to_vec()
            }
            None => vec![S::one(); n],
        };
        let (loss, p1, wsum) = kernels::softmax_xent2(self.nodes[logits].data(), targets, &w);
        if wsum == 0.0 {
            return Err(Error::Tape("cross entropy with all-zero weights".into()));
        }
        self.push(
            Tensor::scalar(from_f64(loss)),
            Op::SoftmaxXent2 {
                logits,
                targets: targets.to_vec(),
                weights: w,
                p1,
                wsum: from_f64(wsum),
            },
            "cross_entropy",
        )
    }

    fn take_grad_buf(&mut self, id: NodeId) -> Vec<S> {
        let numel = self.nodes[id].numel();
        self.nodes[id]
            .grad_mut()
            .take()
            .unwrap_or_else(|| vec![S::zero(); numel])
    }

    fn put_grad(&mut self, id: NodeId, buf: Vec<S>) {
        *self.nodes[id].grad_mut() = Some(buf);
    }

    /// Reverse pass from a scalar loss. Gradients of earlier passes are
    /// discarded first, so repeated calls yield identical buffers.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.grad_enabled {
            return Err(Error::Tape("backward on an inference tape".into()));
        }
        if loss >= self.nodes.len() {
            return Err(Error::Tape(format!("node {} not on tape", loss)));
        }
        if !self.nodes[loss].is_scalar() {
            return Err(Error::Tape(format!(
                "loss must be scalar, got shape {:?}",
                self.nodes[loss].shape()
            )));
        }
        for n in self.nodes.iter_mut() {
            *n.grad_mut() = None;
        }
        self.put_grad(loss, vec![S::one()]);

        for id in (0..self.ops.len()).rev() {
            if self.nodes[id].grad().is_none() {
                continue;
            }
            let op = std::mem::replace(&mut self.ops[id], Op::Leaf);
            let g = self.take_grad_buf(id);
            self.backprop_one(&op, id, &g);
            self.put_grad(id, g);
            self.ops[id] = op;
        }
        Ok(())
    }

    fn backprop_one(&mut self, op: &Op<S>, out: NodeId, g: &[S]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (m, k) = (self.nodes[a].shape()[0], self.nodes[a].shape()[1]);
                let n = self.nodes[b].shape()[1];
                let mut da = self.take_grad_buf(a);
                kernels::matmul_nt_acc(g, self.nodes[b].data(), m, n, k, &mut da);
                self.put_grad(a, da);
                let mut db = self.take_grad_buf(b);
                kernels::matmul_tn_acc(self.nodes[a].data(), g, m, k, n, &mut db);
                self.put_grad(b, db);
            }
            Op::Transpose { x } => {
                let (r, c) = (self.nodes[x].shape()[0], self.nodes[x].shape()[1]);
                let mut dx = self.take_grad_buf(x);
                for i in 0..r {
                    for j in 0..c {
                        dx[i * c + j] += g[j * r + i];
                    }
                }
                self.put_grad(x, dx);
            }
            Op::Reshape { x } => {
                let mut dx = self.take_grad_buf(x);
                for (d, &gv) in dx.iter_mut().zip(g) {
                    *d += gv;
                }
                self.put_grad(x, dx);
            }
            Op::Add { a, b } => {
                for &side in &[a, b] {
                    let mut d = self.take_grad_buf(side);
                    for (dv, &gv) in d.iter_mut().zip(g) {
                        *dv += gv;
                    }
                    self.put_grad(side, d);
                }
            }
            Op::Mul { a, b } => {
                let mut da = self.take_grad_buf(a);
                for ((dv, &gv), &bv) in da.iter_mut().zip(g).zip(self.nodes[b].data()) {
                    *dv += gv * bv;
                }
                self.put_grad(a, da);
                let mut db = self.take_grad_buf(b);
                for ((dv, &gv), &av) in db.iter_mut().zip(g).zip(self.nodes[a].data()) {
                    *dv += gv * av;
                }
                self.put_grad(b, db);
            }
            Op::Scale { x, c } => {
                let mut dx = self.take_grad_buf(x);
                for (dv, &gv) in dx.iter_mut().zip(g) {
                    *dv += gv * c;
                }
                self.put_grad(x, dx);
            }
            Op::AddBias { x, bias } => {
                let d = self.nodes[bias].numel();
                let mut dx = self.take_grad_buf(x);
                for (dv, &gv) in dx.iter_mut().zip(g) {
                    *dv += gv;
                }
                self.put_grad(x, dx);
                let mut db = self.take_grad_buf(bias);
                for row in g.chunks_exact(d) {
                    for (dv, &gv) in db.iter_mut().zip(row) {
                        *dv += gv;
                    }
                }
                self.put_grad(bias, db);
            }
            Op::ConcatCols { ref parts } => {
                let total = self.nodes[out].shape()[1];
                let rows = self.nodes[out].shape()[0];
                let mut off = 0;
                for &p in parts {
                    let w = self.nodes[p].shape()[1];
                    let mut dp = self.take_grad_buf(p);
                    for r in 0..rows {
                        let src = &g[r * total + off..r * total + off + w];
                        for (dv, &gv) in dp[r * w..(r + 1) * w].iter_mut().zip(src) {
                            *dv += gv;
                        }
                    }
                    self.put_grad(p, dp);
                    off += w;
                }
            }
            Op::SoftmaxRows { x, n } => {
                let rows = self.nodes[out].numel() / n;
                let y = self.nodes[out].data().to_vec();
                let mut dx = self.take_grad_buf(x);
                kernels::softmax_rows_backward(&y, g, rows, n, &mut dx);
                self.put_grad(x, dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            } => {
                let d = self.nodes[gamma].numel();
                let mut dx = self.take_grad_buf(x);
                let mut dgamma = self.take_grad_buf(gamma);
                let mut dbeta = self.take_grad_buf(beta);
                kernels::layer_norm_backward(
                    self.nodes[x].data(),
                    self.nodes[gamma].data(),
                    eps,
                    d,
                    g,
                    &mut dx,
                    &mut dgamma,
                    &mut dbeta,
                );
                self.put_grad(x, dx);
                self.put_grad(gamma, dgamma);
                self.put_grad(beta, dbeta);
            }
            Op::Gelu { x } => {
                let mut dx = self.take_grad_buf(x);
                for ((dv, &gv), &xv) in dx.iter_mut().zip(g).zip(self.nodes[x].data()) {
                    *dv += gv * kernels::gelu_derivative(xv);
                }
                self.put_grad(x, dx);
            }
            Op::Im2Col { x, ref geom } => {
                let mut dx = self.take_grad_buf(x);
                col2im_acc(g, geom, &mut dx);
                self.put_grad(x, dx);
            }
            Op::BilinearResize { x, ref geom } => {
                let mut dx = self.take_grad_buf(x);
                bilinear_backward_acc(g, geom, &mut dx);
                self.put_grad(x, dx);
            }
            Op::BlockMeanPool {
                x,
                grid_h,
                grid_w,
                r,
            } => {
                let d = self.nodes[x].shape()[1];
                let ow = grid_w / r;
                let inv = S::one() / from_f64::<S>((r * r) as f64);
                let mut dx = self.take_grad_buf(x);
                for y in 0..grid_h {
                    for xpos in 0..grid_w {
                        let o = ((y / r) * ow + xpos / r) * d;
                        let t = (y * grid_w + xpos) * d;
                        for j in 0..d {
                            dx[t + j] += g[o + j] * inv;
                        }
                    }
                }
                self.put_grad(x, dx);
            }
            Op::Sum { x } => {
                let gv = g[0];
                let mut dx = self.take_grad_buf(x);
                for dv in dx.iter_mut() {
                    *dv += gv;
                }
                self.put_grad(x, dx);
            }
            Op::SoftmaxXent2 {
                logits,
                ref targets,
                ref weights,
                ref p1,
                wsum,
            } => {
                let n = targets.len();
                let gv = g[0];
                let mut dl = self.take_grad_buf(logits);
                for i in 0..n {
                    let w = weights[i] / wsum * gv;
                    let y1 = if targets[i] == 1 { S::one() } else { S::zero() };
                    // d loss / d logit1 = (p1 - y1) * w; logit0 mirrors it.
                    dl[n + i] += (p1[i] - y1) * w;
                    dl[i] += (S::one() - p1[i] - (S::one() - y1)) * w;
                }
                self.put_grad(logits, dl);
            }
        }
    }
}
