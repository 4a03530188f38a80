//! Floating point scalar abstraction.
//!
//! Every solver in this crate is written against [`Scalar`] so the same code
//! runs in `f64` (the default, see the aliases in the crate root) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Real scalar used for data, centers, assignments and objectives.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + LinalgScalar
    + ScalarOperand
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Slack allowed on equality constraints such as row sums.
    const CONSTRAINT_SLACK: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits in a float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn slack() -> Self {
        Self::lit(Self::CONSTRAINT_SLACK)
    }
}

impl Scalar for f64 {
    const CONSTRAINT_SLACK: f64 = 1e-9;
}

impl Scalar for f32 {
    const CONSTRAINT_SLACK: f64 = 1e-5;
}
