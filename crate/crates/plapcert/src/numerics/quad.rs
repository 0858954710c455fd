//! Adaptive Simpson quadrature with a global error budget.
//!
//! The integrator keeps a priority queue of cells and always refines the
//! cell with the largest error estimate, so mass concentrated near an
//! endpoint singularity is resolved without wasting subdivisions on the
//! smooth bulk. Each cell carries the two-panel Simpson value with one
//! Richardson extrapolation step and charges the raw panel disagreement
//! `|S2 - S1|` as its error, a deliberately conservative bound that stays
//! meaningful on algebraically singular integrands where the usual
//! `|S2 - S1| / 15` heuristic undershoots badly.
//!
//! Convergence is declared when the summed error drops below
//! `max(tol, 1e-12 * |value|)`. The relative floor matters when these
//! integrals are nested: inner layer integrals of singular weights can
//! exceed `1e15`, where any fixed absolute tolerance is unreachable in
//! `f64` and would otherwise force runaway subdivision.
//!
//! Sampling conventions:
//! - a non-finite sample at an *original* endpoint counts as zero, so
//!   integrable endpoint singularities integrate directly;
//! - a non-finite sample in the interior poisons the whole estimate
//!   (infinite error, never converged);
//! - a cell too narrow to split keeps its one-panel value and charges its
//!   whole magnitude as error, so unresolved singular mass is never
//!   silently accepted.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::NumericsError;
use crate::real::{real, to_f64, Real};

/// Hard cap on the number of cells a single integration may create.
const MAX_CELLS: usize = 20_000;

/// Relative error floor: the estimate is accepted once its error drops
/// below this fraction of the value, even when the absolute tolerance is
/// unreachable at the integrand's magnitude.
const REL_FLOOR: f64 = 1e-12;

/// Resync the incrementally tracked heap sums this often; incremental
/// add/remove drift must not decide convergence.
const RESUM_INTERVAL: usize = 512;

/// Give up after this many consecutive splits without the total error
/// envelope improving by 1%. Integrands evaluated off a rounding-level
/// staircase (a weight singular just past an endpoint, sampled at the
/// argument's resolution limit) stop converging long before the cell
/// budget runs out; the estimate at that point is as good as the samples
/// allow and further work is wasted.
const STALL_LIMIT: usize = 256;

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate<R> {
    /// Best available value of the integral.
    pub value: R,
    /// Estimated absolute error of `value`.
    pub error_estimate: R,
    /// Whether the error estimate met the tolerance (absolute or relative).
    pub converged: bool,
}

/// Integrates `f` over `[a, b]`, requiring convergence.
///
/// Returns [`NumericsError::QuadratureNoConvergence`] when the refinement
/// budget is exhausted or the integrand blows up away from the endpoints;
/// the payload carries the best estimate and its error bound.
pub fn integrate<R, F>(f: &F, a: R, b: R, tol: R) -> Result<R, NumericsError>
where
    R: Real,
    F: Fn(R) -> R,
{
    let est = integrate_full(f, a, b, tol);
    if est.converged {
        Ok(est.value)
    } else {
        Err(NumericsError::QuadratureNoConvergence {
            best: to_f64(est.value),
            estimate: to_f64(est.error_estimate),
        })
    }
}

/// Integrates `f` over `[a, b]` and reports the estimate even on failure.
pub fn integrate_full<R, F>(f: &F, a: R, b: R, tol: R) -> QuadEstimate<R>
where
    R: Real,
    F: Fn(R) -> R,
{
    integrate_full_rel(f, a, b, tol, real::<R>(REL_FLOOR))
}

/// Like [`integrate_full`] with an explicit relative tolerance.
///
/// Convergence target is `max(tol, rel_tol * |value|)`. A caller that only
/// needs a few significant digits of a potentially enormous integral (the
/// inner layer of a nested integral, say) can pass a loose `rel_tol` and
/// save most of the refinement work; `rel_tol` is floored at `1e-12`.
pub fn integrate_full_rel<R, F>(f: &F, a: R, b: R, tol: R, rel_tol: R) -> QuadEstimate<R>
where
    R: Real,
    F: Fn(R) -> R,
{
    let rel = rel_tol.max(real::<R>(REL_FLOOR));
    if !(a < b) {
        return QuadEstimate {
            value: R::zero(),
            error_estimate: R::zero(),
            converged: a == b,
        };
    }

    let mut sampler = Sampler {
        f,
        left_end: a,
        right_end: b,
        interior_blowup: false,
    };
    let fa = sampler.sample(a);
    let fb = sampler.sample(b);
    let m = midpoint(a, b);
    if !(a < m && m < b) {
        // Too narrow to place even one interior node: a single trapezoid
        // with its full magnitude charged as error.
        let value = (b - a) * (fa + fb) / real::<R>(2.0);
        return QuadEstimate {
            value,
            error_estimate: value.abs(),
            converged: value.abs() <= tol,
        };
    }
    let fm = sampler.sample(m);

    let mut heap: BinaryHeap<Cell<R>> = BinaryHeap::new();
    let mut frozen_value = R::zero();
    let mut frozen_err = R::zero();
    let mut heap_value = R::zero();
    let mut heap_err = R::zero();
    let mut cells = 1usize;
    let mut since_resum = 0usize;
    let mut best_err = R::infinity();
    let mut stale = 0usize;

    let absorb = |piece: Piece<R>,
                      heap: &mut BinaryHeap<Cell<R>>,
                      heap_value: &mut R,
                      heap_err: &mut R,
                      frozen_value: &mut R,
                      frozen_err: &mut R| match piece {
        Piece::Refinable(cell) => {
            *heap_value = *heap_value + cell.value;
            *heap_err = *heap_err + cell.err;
            heap.push(cell);
        }
        Piece::Frozen { value, err } => {
            *frozen_value = *frozen_value + value;
            *frozen_err = *frozen_err + err;
        }
    };

    let first = build_piece(&mut sampler, a, b, fa, fm, fb);
    absorb(
        first,
        &mut heap,
        &mut heap_value,
        &mut heap_err,
        &mut frozen_value,
        &mut frozen_err,
    );

    loop {
        let total_value = frozen_value + heap_value;
        let total_err = frozen_err + heap_err;
        let target = tol.max(rel * total_value.abs());
        if total_err <= target {
            // Re-derive the sums exactly before trusting the running ones.
            let (hv, he) = resum(&heap);
            heap_value = hv;
            heap_err = he;
            let exact_value = frozen_value + hv;
            let exact_err = frozen_err + he;
            if exact_err <= tol.max(rel * exact_value.abs()) {
                break;
            }
            continue;
        }
        // Frozen cells can never shrink; once they alone bust the budget the
        // verdict is settled and further refinement is wasted work.
        if frozen_err > target {
            break;
        }
        if cells >= MAX_CELLS {
            break;
        }
        if total_err < real::<R>(0.99) * best_err {
            best_err = total_err;
            stale = 0;
        } else {
            stale += 1;
            if stale >= STALL_LIMIT {
                break;
            }
        }
        let Some(cell) = heap.pop() else {
            break;
        };
        heap_value = heap_value - cell.value;
        heap_err = heap_err - cell.err;
        let mid = midpoint(cell.a, cell.b);
        let halves = [
            (cell.a, mid, cell.fa, cell.flm, cell.fm),
            (mid, cell.b, cell.fm, cell.frm, cell.fb),
        ];
        for (ha, hb, hfa, hfm, hfb) in halves {
            let piece = build_piece(&mut sampler, ha, hb, hfa, hfm, hfb);
            absorb(
                piece,
                &mut heap,
                &mut heap_value,
                &mut heap_err,
                &mut frozen_value,
                &mut frozen_err,
            );
        }
        cells += 2;
        since_resum += 1;
        if since_resum >= RESUM_INTERVAL {
            let (hv, he) = resum(&heap);
            heap_value = hv;
            heap_err = he;
            since_resum = 0;
        }
    }

    let (hv, he) = resum(&heap);
    let value = frozen_value + hv;
    let mut error_estimate = frozen_err + he;
    if sampler.interior_blowup || !error_estimate.is_finite() {
        error_estimate = R::infinity();
    }
    let target = tol.max(rel * value.abs());
    let converged = value.is_finite() && error_estimate <= target;
    QuadEstimate {
        value,
        error_estimate,
        converged,
    }
}

/// A refinable cell: endpoints, the five samples spanning it, the
/// Richardson-improved two-panel value, and the charged error.
struct Cell<R> {
    a: R,
    b: R,
    fa: R,
    flm: R,
    fm: R,
    frm: R,
    fb: R,
    value: R,
    err: R,
}

enum Piece<R> {
    Refinable(Cell<R>),
    Frozen { value: R, err: R },
}

impl<R: Real> PartialEq for Cell<R> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl<R: Real> Eq for Cell<R> {}

impl<R: Real> PartialOrd for Cell<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<R: Real> Ord for Cell<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

struct Sampler<'a, R, F> {
    f: &'a F,
    left_end: R,
    right_end: R,
    interior_blowup: bool,
}

impl<R: Real, F: Fn(R) -> R> Sampler<'_, R, F> {
    fn sample(&mut self, x: R) -> R {
        let y = (self.f)(x);
        if y.is_finite() {
            y
        } else {
            if x != self.left_end && x != self.right_end {
                self.interior_blowup = true;
            }
            R::zero()
        }
    }
}

/// Builds a cell from three known samples, evaluating the two quarter
/// points. Returns a frozen piece when the quarter points cannot be
/// placed strictly inside (width at rounding level).
fn build_piece<R, F>(sampler: &mut Sampler<'_, R, F>, a: R, b: R, fa: R, fm: R, fb: R) -> Piece<R>
where
    R: Real,
    F: Fn(R) -> R,
{
    let m = midpoint(a, b);
    let lm = midpoint(a, m);
    let rm = midpoint(m, b);
    if !(a < lm && lm < m && m < rm && rm < b) {
        let value = simpson(b - a, fa, fm, fb);
        return Piece::Frozen {
            value,
            err: value.abs(),
        };
    }
    let flm = sampler.sample(lm);
    let frm = sampler.sample(rm);
    let whole = simpson(b - a, fa, fm, fb);
    let split = simpson(m - a, fa, flm, fm) + simpson(b - m, fm, frm, fb);
    let delta = split - whole;
    let value = split + delta / real::<R>(15.0);
    let mut err = delta.abs();
    if !err.is_finite() {
        err = R::infinity();
    }
    Piece::Refinable(Cell {
        a,
        b,
        fa,
        flm,
        fm,
        frm,
        fb,
        value,
        err,
    })
}

fn resum<R: Real>(heap: &BinaryHeap<Cell<R>>) -> (R, R) {
    let mut value = R::zero();
    let mut err = R::zero();
    for cell in heap.iter() {
        value = value + cell.value;
        err = err + cell.err;
    }
    (value, err)
}

fn midpoint<R: Real>(a: R, b: R) -> R {
    (a + b) / real::<R>(2.0)
}

fn simpson<R: Real>(h: R, fa: R, fm: R, fb: R) -> R {
    h * (fa + real::<R>(4.0) * fm + fb) / real::<R>(6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_a_line_exactly() {
        let v = integrate(&|t: f64| t, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.5).abs() <= 1e-12, "got {v}");
    }

    #[test]
    fn zero_width_interval_is_zero() {
        let est = integrate_full(&|t: f64| t.exp(), 0.3, 0.3, 1e-12);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn bounded_reciprocal_square_on_half_interval() {
        // d/dt [1/(1-t)] = (1-t)^-2, so the integral over [0, 1/2] is 1.
        let v = integrate(&|t: f64| (t - 1.0).powi(-2), 0.0, 0.5, 1e-10).unwrap();
        assert!((v - 1.0).abs() <= 1e-10, "got {v}");
    }

    #[test]
    fn observed_error_stays_under_tolerance_as_it_shrinks() {
        let truth = 2.0f64.exp() - 1.0;
        let mut tol = 1e-4f64;
        while tol >= 1e-12 {
            let v = integrate(&|t: f64| t.exp(), 0.0, 2.0, tol).unwrap();
            assert!(
                (v - truth).abs() <= tol,
                "tol {tol:e}: error {:e}",
                (v - truth).abs()
            );
            tol /= 2.0;
        }
    }

    #[test]
    fn integrable_endpoint_singularity_converges() {
        let est = integrate_full(&|t: f64| t.powf(-0.5), 0.0, 1.0, 1e-6);
        assert!(est.converged, "error estimate {:e}", est.error_estimate);
        assert!((est.value - 2.0).abs() <= 1e-5, "got {}", est.value);
    }

    #[test]
    fn huge_magnitude_accepts_relative_accuracy() {
        // 3e18 * t^2 integrates to 1e18; no absolute tolerance is
        // reachable there, the relative floor must take over.
        let est = integrate_full(&|t: f64| 3e18 * t * t, 0.0, 1.0, 1e-10);
        assert!(est.converged, "error estimate {:e}", est.error_estimate);
        assert!(
            (est.value / 1e18 - 1.0).abs() <= 1e-9,
            "got {:e}",
            est.value
        );
    }

    #[test]
    fn non_integrable_singularity_is_reported() {
        let err = integrate(&|t: f64| (1.0 - t).powi(-2), 0.0, 1.0, 1e-8).unwrap_err();
        match err {
            NumericsError::QuadratureNoConvergence { best, estimate } => {
                assert!(best > 1e10, "best {best:e}");
                assert!(estimate > 1e10, "estimate {estimate:e}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn interior_pole_never_converges() {
        // The first midpoint lands exactly on the pole at 1/2.
        let est = integrate_full(&|t: f64| (t - 0.5).recip(), 0.0, 1.0, 1e-8);
        assert!(!est.converged);
        assert!(est.error_estimate.is_infinite());
    }

    #[test]
    fn works_in_f32() {
        let v: f32 = integrate(&|t: f32| t * t, 0.0f32, 1.0f32, 1e-4f32).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 1e-4, "got {v}");
    }
}
