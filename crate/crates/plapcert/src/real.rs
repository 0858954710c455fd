//! Scalar abstraction for the numerical kernels.
//!
//! The low-level numerics (quadrature, root bracketing, golden-section
//! search, the p-Laplacian scalar maps, grid functions) are generic over any
//! IEEE-style float. The rest of the crate works with the concrete alias
//! [`crate::Scalar`]; the problem layer parses `f64` from config files and
//! the default tolerances sit well below `f32` resolution anyway.

use core::fmt::{Debug, Display};

/// Floating-point scalar usable by the numerical kernels.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only if the target type cannot represent ordinary finite constants,
/// which no `Real` implementor of interest does.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("constant must be representable in the scalar type")
}

/// Best-effort widening back to `f64`, used for error payloads and reports.
#[inline]
pub fn to_f64<R: Real>(x: R) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
