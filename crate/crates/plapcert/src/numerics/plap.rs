//! Scalar p-Laplacian maps `phi_p(w) = |w|^{p-2} w` and their inverses.

use super::NumericsError;
use crate::real::{real, to_f64, Real};

fn check_p<R: Real>(p: R) -> Result<(), NumericsError> {
    if !(p.is_finite() && p > R::one()) {
        return Err(NumericsError::Domain(format!(
            "p-Laplacian exponent must be finite and > 1, got {}",
            to_f64(p)
        )));
    }
    Ok(())
}

/// `phi_p(w) = |w|^{p-2} w`, written as `sgn(w) |w|^{p-1}` so that `w = 0`
/// maps to `0` even when `p < 2`.
pub fn phi_p<R: Real>(w: R, p: R) -> Result<R, NumericsError> {
    check_p(p)?;
    if !w.is_finite() {
        return Err(NumericsError::Domain(format!(
            "phi_p argument must be finite, got {}",
            to_f64(w)
        )));
    }
    Ok(signed_pow(w, p - R::one()))
}

/// Inverse map `phi_p^{-1}(w) = sgn(w) |w|^{1/(p-1)}`.
pub fn phi_p_inv<R: Real>(w: R, p: R) -> Result<R, NumericsError> {
    check_p(p)?;
    if !w.is_finite() {
        return Err(NumericsError::Domain(format!(
            "phi_p_inv argument must be finite, got {}",
            to_f64(w)
        )));
    }
    Ok(signed_pow(w, (p - R::one()).recip()))
}

#[inline]
fn signed_pow<R: Real>(w: R, e: R) -> R {
    if w == R::zero() {
        return R::zero();
    }
    let mag = w.abs().powf(e);
    if w > R::zero() {
        mag
    } else {
        -mag
    }
}

/// Odd power map with the exponent validated once.
///
/// The operator kernels apply `phi_p` and `phi_p^{-1}` at every grid node of
/// every scan point, so the common exponents get branch-free fast paths.
#[derive(Debug, Clone, Copy)]
pub struct PLaplacian<R: Real> {
    p: R,
    fwd: PowKind<R>,
    inv: PowKind<R>,
}

#[derive(Debug, Clone, Copy)]
enum PowKind<R> {
    Identity,
    Sqrt,
    Square,
    General(R),
}

impl<R: Real> PowKind<R> {
    fn classify(e: R) -> Self {
        if e == R::one() {
            PowKind::Identity
        } else if e == real(0.5) {
            PowKind::Sqrt
        } else if e == real(2.0) {
            PowKind::Square
        } else {
            PowKind::General(e)
        }
    }

    #[inline]
    fn apply(&self, w: R) -> R {
        if w == R::zero() {
            return R::zero();
        }
        let (s, a) = if w > R::zero() {
            (R::one(), w)
        } else {
            (-R::one(), -w)
        };
        let mag = match self {
            PowKind::Identity => a,
            PowKind::Sqrt => a.sqrt(),
            PowKind::Square => a * a,
            PowKind::General(e) => a.powf(*e),
        };
        s * mag
    }
}

impl<R: Real> PLaplacian<R> {
    pub fn new(p: R) -> Result<Self, NumericsError> {
        check_p(p)?;
        let one = R::one();
        Ok(Self {
            p,
            fwd: PowKind::classify(p - one),
            inv: PowKind::classify((p - one).recip()),
        })
    }

    pub fn p(&self) -> R {
        self.p
    }

    /// `phi_p(w)`
    #[inline]
    pub fn phi(&self, w: R) -> R {
        self.fwd.apply(w)
    }

    /// `phi_p^{-1}(w)`
    #[inline]
    pub fn phi_inv(&self, w: R) -> R {
        self.inv.apply(w)
    }
}
