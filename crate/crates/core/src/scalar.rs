//! Scalar abstraction shared by the numerical modules.
//!
//! Everything that carries LLRs or GA means is generic over [`Real`], which is
//! implemented for `f32` and `f64`. Special functions (Gaussian tail, capacity
//! quadrature) are evaluated in `f64` and converted back.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar used for LLRs, GA means and error probabilities.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    #[inline]
    fn lit(x: f64) -> Self {
        // from_f64 never fails for f32/f64; it saturates to +-inf.
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
