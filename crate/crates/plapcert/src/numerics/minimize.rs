//! Scalar minimization on a closed interval: seeded scan plus golden-section
//! refinement around the best seed.

use crate::real::{real, Real};

const SEEDS: usize = 64;

/// Minimize `f` on `[a, b]`.
///
/// The interval is sampled at 65 equally spaced seeds (endpoints included);
/// the best seed's one-cell neighborhood is refined by golden-section search
/// to width `tol`. Ties prefer the leftmost seed, so symmetric objectives
/// resolve deterministically. Returns `(argmin, min)`.
pub fn minimize_1d<R: Real, F: Fn(R) -> R>(f: F, a: R, b: R, tol: R) -> (R, R) {
    assert!(a <= b, "minimization bounds must be ordered");
    assert!(tol > R::zero(), "minimization tolerance must be positive");
    if a == b {
        return (a, f(a));
    }

    let n = real::<R>(SEEDS as f64);
    let mut best_k = 0usize;
    let mut best_x = a;
    let mut best_y = f(a);
    for k in 1..=SEEDS {
        let x = if k == SEEDS {
            b
        } else {
            a + (b - a) * real::<R>(k as f64) / n
        };
        let y = f(x);
        if y < best_y {
            best_k = k;
            best_x = x;
            best_y = y;
        }
    }

    // Bracket of one seed cell on each side of the winner, clamped to [a, b].
    let cell = (b - a) / n;
    let lo = if best_k == 0 { a } else { best_x - cell };
    let hi = if best_k == SEEDS { b } else { best_x + cell };
    let (gx, gy) = golden_section(&f, lo.max(a), hi.min(b), tol);

    if gy < best_y {
        (gx, gy)
    } else {
        (best_x, best_y)
    }
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// When the interval holds no strict interior minimum the probes drift to
/// one side and the midpoint of the final bracket is still a valid answer
/// within `tol` of the best point seen.
fn golden_section<R: Real, F: Fn(R) -> R>(f: &F, mut lo: R, mut hi: R, tol: R) -> (R, R) {
    // inverse golden ratio
    let phi = (real::<R>(5.0).sqrt() - R::one()) / real::<R>(2.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut y1 = f(x1);
    let mut y2 = f(x2);
    while hi - lo > tol {
        // `<=` keeps the left probe on ties, biasing the walk leftwards
        if y1 <= y2 {
            hi = x2;
            x2 = x1;
            y2 = y1;
            x1 = hi - phi * (hi - lo);
            y1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            y1 = y2;
            x2 = lo + phi * (hi - lo);
            y2 = f(x2);
        }
        if x1 >= x2 {
            break;
        }
    }
    let mid = lo + (hi - lo) / real::<R>(2.0);
    (mid, f(mid))
}
