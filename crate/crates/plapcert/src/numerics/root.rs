//! Leftmost-root search: coarse scan for the first sign change, then
//! bisection.

use super::NumericsError;
use crate::real::{real, Real};

/// Smallest root of `h` on `[a, b]`.
///
/// The interval is scanned left to right at `scan_points + 1` equally spaced
/// nodes. A node where `h` vanishes exactly is returned immediately; the
/// first bracket with a sign change is refined by bisection to width `tol`.
/// Returns [`NumericsError::RootNotFound`] when no sign change is seen.
pub fn find_smallest_root<R: Real, F: Fn(R) -> R>(
    h: F,
    a: R,
    b: R,
    scan_points: usize,
    tol: R,
) -> Result<R, NumericsError> {
    assert!(scan_points >= 1, "need at least one scan interval");
    assert!(a <= b, "scan bounds must be ordered");
    assert!(tol > R::zero(), "bisection tolerance must be positive");

    let n = real::<R>(scan_points as f64);
    let mut x_prev = a;
    let mut h_prev = h(a);
    if h_prev == R::zero() {
        return Ok(a);
    }

    for k in 1..=scan_points {
        let x = if k == scan_points {
            b
        } else {
            a + (b - a) * real::<R>(k as f64) / n
        };
        let hx = h(x);
        if hx == R::zero() {
            return Ok(x);
        }
        if (h_prev < R::zero()) != (hx < R::zero()) {
            return Ok(bisect(&h, x_prev, x, h_prev, tol));
        }
        x_prev = x;
        h_prev = hx;
    }
    Err(NumericsError::RootNotFound { scan_points })
}

/// Bisection on a bracket where `h(lo) = h_lo` and `h(hi)` has opposite sign.
fn bisect<R: Real, F: Fn(R) -> R>(h: &F, mut lo: R, mut hi: R, h_lo: R, tol: R) -> R {
    let lo_negative = h_lo < R::zero();
    let two = real::<R>(2.0);
    while hi - lo > tol {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let hm = h(mid);
        if hm == R::zero() {
            return mid;
        }
        if (hm < R::zero()) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) / two
}
