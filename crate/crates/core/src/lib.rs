//! Building-footprint segmentation at desk scale.
//!
//! The crate covers the full loop: fusing heterogeneous aerial datasets into a
//! uniform 256x256 patch corpus, a hierarchical attention segmentation model
//! built on a small reverse-mode tensor core, cross-entropy training with
//! warmup plus polynomial decay, and IoU / boundary-IoU evaluation with
//! report and overlay output.
//!
//! All numeric code is generic over the element type through [`Scalar`]:
//! training runs in f32, gradient checking re-runs the same graph in f64.

pub mod data;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Tensor in training precision.
pub type Tensor32 = tensor::Tensor<f32>;
/// Tensor in gradient-check precision.
pub type Tensor64 = tensor::Tensor<f64>;
/// Autodiff tape in training precision.
pub type Tape32 = tensor::Tape<f32>;
/// Autodiff tape in gradient-check precision.
pub type Tape64 = tensor::Tape<f64>;
