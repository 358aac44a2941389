//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type the pipeline can run on (`f32` or `f64`).
///
/// Linear algebra goes through [`RealField`]; conversions to and from
/// literals go through `num-traits`.
pub trait Scalar:
    RealField
    + Copy
    + Default
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, saturating to the representable range.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal fits the scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits the scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon as an `f64`.
    fn epsilon_f64() -> f64;

    /// Smallest positive value safe to take `ln` of.
    fn tiny() -> f64;

    /// Smallest p-value kept by clamping.
    fn p_floor() -> f64 {
        Self::tiny()
    }

    /// Largest p-value strictly below one.
    fn p_ceil() -> f64;
}

impl Scalar for f32 {
    fn epsilon_f64() -> f64 {
        f32::EPSILON as f64
    }

    fn tiny() -> f64 {
        1e-37
    }

    fn p_ceil() -> f64 {
        1.0 - f32::EPSILON as f64 / 2.0
    }
}

impl Scalar for f64 {
    fn epsilon_f64() -> f64 {
        f64::EPSILON
    }

    fn tiny() -> f64 {
        1e-300
    }

    fn p_ceil() -> f64 {
        1.0 - 1e-16
    }
}
