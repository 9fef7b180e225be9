//! Scalar abstraction: the numeric core is generic over the float width.

use std::fmt::{Debug, Display};

/// Floating-point scalar usable throughout the numeric core (f32 or f64).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn c(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("literal not representable")
    }

    /// Widen to `f64` (exact for f32 and f64).
    fn f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar not convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` constant into any scalar type.
pub fn cast<F: Scalar>(v: f64) -> F {
    F::c(v)
}
