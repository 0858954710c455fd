//! Damped Picard iteration with deterministic multi-start.
//!
//! The fixed-point operator is compact and maps the cone into itself, which
//! favors plain iteration over Newton steps: the operator is not smooth
//! through the turning point or where the inverse homeomorphism has infinite
//! slope. Each start is iterated independently; results are deduplicated and
//! sorted so the output is a deterministic function of the inputs.
//!
//! Picard iteration only finds attracting fixed points. Solutions whose
//! annulus carries index zero can be repelling and may be missed; a shorter
//! result list than the certified count is therefore not a contradiction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{Certificate, Conclusion, NormInterval};
use crate::operator::{cone_membership, ConeReport, Operator, OperatorError, StatePair};
use crate::problem::{NumericsConfig, ProblemSpec};
use crate::{Grid, Scalar};

/// Iteration controls for the damped Picard solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Damping factor in `(0, 1]`; 1 is an undamped fixed-point step.
    pub damping: Scalar,
    pub max_iterations: usize,
    /// Residual below which the iteration is converged (the undamped step
    /// size, which equals the fixed-point defect at the current state).
    pub tol: Scalar,
    /// Amplitude pairs `(alpha1, alpha2)` scaling the canonical start
    /// profiles `alpha1 * (1 - t)` and `alpha2 * min(t, 1 - t)`.
    pub starts: Vec<(Scalar, Scalar)>,
    /// Product sup-distance under which two solutions count as one.
    pub dedup_distance: Scalar,
    /// Product norm treated as divergence.
    pub divergence_norm: Scalar,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let amplitudes = [0.03, 0.3, 1.0, 3.0, 8.0];
        let mut starts = Vec::with_capacity(amplitudes.len() * amplitudes.len());
        for &a1 in &amplitudes {
            for &a2 in &amplitudes {
                starts.push((a1, a2));
            }
        }
        Self {
            damping: 0.5,
            max_iterations: 500,
            tol: 1e-10,
            starts,
            dedup_distance: 1e-6,
            divergence_norm: 1e6,
        }
    }
}

/// A converged fixed point together with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub state: StatePair,
    /// Turning point of the second component at the solution.
    pub sigma: Scalar,
    /// Fixed-point defect re-evaluated at the returned state.
    pub residual: Scalar,
    /// `(sup |u|, sup |v|, product norm)`.
    pub norms: (Scalar, Scalar, Scalar),
    pub cone_report: ConeReport,
    pub iterations: usize,
    pub start_used: (Scalar, Scalar),
}

/// Why an iteration produced no solution.
#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    /// The step size never dropped below the tolerance.
    #[error("no convergence after {iterations} iterations; last step {last_step}")]
    NonConvergence {
        iterations: usize,
        last_step: Scalar,
        /// Product norm of the state at the start of each iteration.
        trajectory: Vec<Scalar>,
    },
    /// The iteration left the configured norm ball.
    #[error("diverged at iteration {iterations}: norm {norm} exceeds ceiling {ceiling}")]
    Diverged {
        iterations: usize,
        norm: Scalar,
        ceiling: Scalar,
    },
}

/// The canonical cone profile pair scaled by the given amplitudes.
///
/// Both shapes satisfy the cone window inequalities with equality, so starts
/// sit on the boundary between the localization sets.
pub fn canonical_start(grid: Grid, alpha1: Scalar, alpha2: Scalar) -> StatePair {
    StatePair::from_fns(
        grid,
        move |t| alpha1 * (1.0 - t),
        move |t| alpha2 * t.min(1.0 - t),
    )
}

fn cone_tolerance(state: &StatePair) -> Scalar {
    1e-8 * state.norm().max(1e-12)
}

/// Damped Picard iteration `state <- (1 - w) * state + w * T(state)`.
///
/// Panics when the start is not in the cone or the config is malformed. The
/// convergence test compares the undamped step `|state - T(state)|` (the
/// fixed-point defect) against `tol`, so a returned record always satisfies
/// `residual < tol`; the residual, turning point and cone report are taken
/// from a full operator evaluation at the returned state.
pub fn picard_solve(
    spec: &ProblemSpec,
    numerics: &NumericsConfig,
    start: StatePair,
    cfg: &SolverConfig,
) -> Result<SolutionRecord, SolveError> {
    assert!(
        cfg.damping > 0.0 && cfg.damping <= 1.0,
        "damping must lie in (0, 1]"
    );
    assert!(cfg.tol > 0.0, "solver tolerance must be positive");
    assert!(
        cone_membership(spec, &start, cone_tolerance(&start)).all_pass(),
        "start state must lie in the cone"
    );

    let op = Operator::new(spec, numerics)?;
    let start_norm = (start.u().max_abs(), start.v().max_abs());
    let mut state = start;
    let mut trajectory = Vec::new();
    let mut last_step = Scalar::INFINITY;

    for iteration in 1..=cfg.max_iterations {
        trajectory.push(state.norm());
        let out = op.apply(&state)?;
        let step = state
            .u()
            .sup_distance(&out.tu)
            .max(state.v().sup_distance(&out.tv));
        if step < cfg.tol {
            let cone_report = cone_membership(spec, &state, cone_tolerance(&state));
            let norms = (state.u().max_abs(), state.v().max_abs(), state.norm());
            return Ok(SolutionRecord {
                sigma: out.sigma,
                residual: step,
                norms,
                cone_report,
                iterations: iteration,
                start_used: start_norm,
                state,
            });
        }
        last_step = step;
        let finite = out
            .tu
            .values()
            .iter()
            .chain(out.tv.values().iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(SolveError::Diverged {
                iterations: iteration,
                norm: Scalar::INFINITY,
                ceiling: cfg.divergence_norm,
            });
        }
        state = state.blend(&out.into_state(), cfg.damping);
        let norm = state.norm();
        if norm > cfg.divergence_norm {
            return Err(SolveError::Diverged {
                iterations: iteration,
                norm,
                ceiling: cfg.divergence_norm,
            });
        }
    }

    Err(SolveError::NonConvergence {
        iterations: cfg.max_iterations,
        last_step,
        trajectory,
    })
}

/// Runs [`picard_solve`] from every configured start and merges the results.
///
/// Starts run concurrently; the merge is a sequential reduction in start
/// order, so the outcome is deterministic. Failed starts (divergence,
/// non-convergence, evaluation errors) are dropped. Duplicates within the
/// dedup distance keep the earliest start; the final list is sorted by
/// product norm ascending.
pub fn multi_start_solve(
    spec: &ProblemSpec,
    numerics: &NumericsConfig,
    cfg: &SolverConfig,
) -> Vec<SolutionRecord> {
    assert!(!cfg.starts.is_empty(), "need at least one start amplitude pair");
    let grid = Grid::new(numerics.n);
    let outcomes: Vec<Option<SolutionRecord>> = cfg
        .starts
        .par_iter()
        .map(|&(a1, a2)| {
            let start = canonical_start(grid, a1, a2);
            let mut record = picard_solve(spec, numerics, start, cfg).ok()?;
            record.start_used = (a1, a2);
            Some(record)
        })
        .collect();

    let mut records: Vec<SolutionRecord> = Vec::new();
    for record in outcomes.into_iter().flatten() {
        let duplicate = records
            .iter()
            .any(|kept| kept.state.distance(&record.state) < cfg.dedup_distance);
        if !duplicate {
            records.push(record);
        }
    }
    records.sort_by(|a, b| a.norms.2.partial_cmp(&b.norms.2).expect("finite norms"));
    records
}

/// A solution record tagged with the certified norm interval containing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedRecord {
    pub record: SolutionRecord,
    /// The certified interval `(lo, hi]` containing the product norm, if any.
    pub interval: Option<NormInterval>,
    /// Human-readable tag: the interval, or "outside certified intervals".
    pub label: String,
}

/// Tags each record with the certificate interval containing its norm.
///
/// Panics unless the certificate concludes solutions. A record outside every
/// interval is legal: certificates bound the solution count from below, they
/// do not enumerate.
pub fn localize(records: Vec<SolutionRecord>, cert: &Certificate) -> Vec<LocalizedRecord> {
    assert!(
        matches!(cert.conclusion, Conclusion::Solutions { .. }),
        "localization needs a conclusive certificate"
    );
    records
        .into_iter()
        .map(|record| {
            let norm = record.norms.2;
            let interval = cert
                .localization
                .iter()
                .copied()
                .find(|iv| iv.lo < norm && norm <= iv.hi);
            let label = match interval {
                Some(iv) => format!("({}, {}]", crate::sig9(iv.lo), crate::sig9(iv.hi)),
                None => "outside certified intervals".to_string(),
            };
            LocalizedRecord {
                record,
                interval,
                label,
            }
        })
        .collect()
}
