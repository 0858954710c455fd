//! Certified numerics for a one-dimensional two-component p-Laplacian
//! boundary value problem.
//!
//! The crate turns a textual problem description (weights, nonlinearities,
//! boundary maps, structural windows) into:
//!
//! * a validated problem model ([`problem`]),
//! * the equivalent fixed-point operator and its evaluation ([`operator`]),
//! * cone constants, growth bounds and existence/nonexistence certificates
//!   ([`certificates`]),
//! * a damped Picard multi-start solver ([`solver`]),
//! * machine-readable run reports ([`report`]).
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! the crate-level aliases fix `f64` for ordinary use.

pub mod certificates;
pub mod expr;
pub mod numerics;
pub mod operator;
pub mod problem;
pub mod real;
pub mod report;
pub mod solver;

pub use real::Real;

/// Default scalar type used by the tool.
pub type Scalar = f64;

/// Renders a scalar with 9 significant digits, the precision used by every
/// human-readable surface of the tool (reports, messages, CSV files).
pub fn sig9(x: Scalar) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // decimal notation while readable, scientific for extreme magnitudes
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..9).contains(&magnitude) {
        let decimals = (8 - magnitude).max(0) as usize;
        let printed = format!("{x:.decimals$}");
        if decimals > 0 {
            printed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            printed
        }
    } else {
        format!("{x:.8e}")
    }
}

/// [`numerics::Grid`] re-exported at the crate root.
pub type Grid = numerics::Grid;

/// Nodal values over a [`Grid`] at the default scalar type.
pub type GridFunction = numerics::GridFunction<Scalar>;
