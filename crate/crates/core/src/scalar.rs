//! Element type abstraction. The pipeline trains in f32 and re-runs the same
//! generic code in f64 for gradient checking, so everything numeric is written
//! against this trait instead of a concrete float.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

pub trait Scalar:
    Float + NumAssign + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Dtype tag used in checkpoint headers and diagnostics.
    const NAME: &'static str;

    /// Gauss error function. Evaluated in f64 so f32 inherits the full-
    /// precision result rounded once.
    fn erf(self) -> Self;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn erf(self) -> Self {
        libm::erf(self as f64) as f32
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn erf(self) -> Self {
        libm::erf(self)
    }
}

/// Lossy conversion from f64, for constants inside generic code.
#[inline]
pub fn from_f64<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("f64 constant representable in scalar type")
}

/// Widening conversion to f64, for accumulation and reporting.
#[inline]
pub fn to_f64<S: Scalar>(v: S) -> f64 {
    num_traits::ToPrimitive::to_f64(&v).expect("scalar convertible to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_points() {
        assert_eq!(0f64.erf(), 0.0);
        assert!((1f64.erf() - 0.8427007929497149).abs() < 1e-15);
        assert!((-1f64.erf() + 0.8427007929497149).abs() < 1e-15);
        assert!(((0.5f32).erf() - 0.5204999).abs() < 1e-6);
    }

    #[test]
    fn conversions_round_trip() {
        let x: f32 = from_f64(0.25);
        assert_eq!(x, 0.25);
        assert_eq!(to_f64(x), 0.25);
    }
}
