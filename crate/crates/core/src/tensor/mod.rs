//! Dense row-major tensors and a reverse-mode autodiff tape.
//!
//! The tape is an arena: it owns every tensor produced during a forward pass,
//! operations take and return [`NodeId`]s, and `backward` walks the recorded
//! operations in reverse. Keeping tensors in one arena sidesteps graph
//! ownership cycles and makes gradient accumulation across fan-out trivial.

mod conv;
mod gradcheck;
mod kernels;
mod resize;
mod tape;

pub use conv::ConvGeom;
pub use gradcheck::{check_all_ops, finite_diff_grad, relative_error, GradReport, OpScenario};
pub use resize::{bilinear_backward_acc, bilinear_forward, ResizeGeom};
pub use tape::{NodeId, Tape};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense tensor with row-major contiguous storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    grad: Option<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::InvalidShape {
                op: "tensor",
                shape,
                reason: format!("shape wants {} elements, data has {}", numel, data.len()),
            });
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![S::zero(); numel],
            grad: None,
        }
    }

    pub fn filled(shape: Vec<usize>, value: S) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; numel],
            grad: None,
        }
    }

    pub fn scalar(value: S) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            grad: None,
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> S) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: (0..numel).map(&mut f).collect(),
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Gradient buffer, populated by `Tape::backward` for reachable nodes.
    pub fn grad(&self) -> Option<&[S]> {
        self.grad.as_deref()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Single element of a scalar tensor.
    pub fn item(&self) -> Result<S> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(Error::InvalidShape {
                op: "item",
                shape: self.shape.clone(),
                reason: "expected a single-element tensor".into(),
            })
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Interpret as a matrix.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            _ => Err(Error::InvalidShape {
                op,
                shape: self.shape.clone(),
                reason: "expected a rank-2 tensor".into(),
            }),
        }
    }

    /// Interpret as channels x height x width.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            _ => Err(Error::InvalidShape {
                op,
                shape: self.shape.clone(),
                reason: "expected a rank-3 tensor".into(),
            }),
        }
    }

    /// Element-type conversion, used to rerun f32 graphs in f64 and to store
    /// checkpoints in f32.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| crate::scalar::from_f64(crate::scalar::to_f64(v)))
                .collect(),
            grad: None,
        }
    }

    pub(crate) fn grad_mut(&mut self) -> &mut Option<Vec<S>> {
        &mut self.grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_element_count() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        let err = Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(err.to_string().contains("6 elements"));
    }

    #[test]
    fn scalar_item() {
        let t = Tensor::scalar(4.0f64);
        assert_eq!(t.item().unwrap(), 4.0);
        assert!(Tensor::<f64>::zeros(vec![2]).item().is_err());
    }

    #[test]
    fn cast_preserves_values() {
        let t = Tensor::<f64>::new(vec![3], vec![0.5, -1.25, 2.0]).unwrap();
        let f: Tensor<f32> = t.cast();
        assert_eq!(f.data(), &[0.5f32, -1.25, 2.0]);
    }
}
