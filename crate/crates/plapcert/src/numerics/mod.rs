//! Self-contained numerical kernels: scalar p-Laplacian maps, uniform grids,
//! adaptive quadrature, leftmost-root bracketing and 1-d minimization.
//!
//! Everything here is generic over [`crate::real::Real`]; the crate root
//! exports `f64` aliases for the common instantiations.

pub mod grid;
pub mod minimize;
pub mod plap;
pub mod quad;
pub mod root;

pub use grid::{cumulative_integral, Grid, GridFunction};
pub use minimize::minimize_1d;
pub use plap::{phi_p, phi_p_inv, PLaplacian};
pub use quad::{integrate, integrate_full, integrate_full_rel, QuadEstimate};
pub use root::find_smallest_root;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    /// Input outside a kernel's domain (non-finite argument, `p <= 1`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature exhausted its refinement budget.
    ///
    /// `best` is the estimate assembled so far; `estimate` bounds its error
    /// (infinite when a non-integrable sample was seen away from the
    /// interval endpoints).
    #[error("quadrature did not converge: best estimate {best:e}, estimated error {estimate:e}")]
    QuadratureNoConvergence { best: f64, estimate: f64 },

    /// The scan grid contained no sign change.
    #[error("no sign change on the scan grid ({scan_points} intervals)")]
    RootNotFound { scan_points: usize },
}
