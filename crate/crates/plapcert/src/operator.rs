//! Evaluation of the fixed-point operator on grid functions.
//!
//! A state is a pair of nonnegative grid functions `(u, v)`. The operator
//! maps it to a new pair: the first component integrates the weighted
//! forcing `g1*f1` twice (cumulative mass, inverse power map, outer tail
//! integral) and adds the first boundary term; the second component does
//! the same around a turning point `sigma`, integrating away from it on
//! both sides so that the output peaks there. `sigma` is the leftmost
//! point where the two branch formulas agree; it solves a scalar matching
//! equation and is recomputed from scratch at every evaluation, because it
//! depends on the state and a stale bracket could skip the smallest root.
//!
//! All integrals are trapezoid sums over the state's grid with `O(n)` cost
//! per output node. When a weight is declared endpoint-singular in the
//! numerics config, the first and last grid cells integrate `g*f` (with
//! `u`, `v` interpolated) by adaptive quadrature instead; the error charged
//! by those cells is surfaced in [`OperatorOutput::quadrature_error_estimate`].
//!
//! Evaluation is pure: a shared [`Operator`] may be used from several
//! threads at once.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::expr::EvalError;
use crate::numerics::{
    cumulative_integral, find_smallest_root, integrate_full, NumericsError, PLaplacian,
};
use crate::problem::{NumericsConfig, ProblemSpec};
use crate::{Grid, GridFunction, Scalar};

/// A pair of grid functions on a shared grid with finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    u: GridFunction,
    v: GridFunction,
}

impl StatePair {
    /// Panics when the grids differ or any value is non-finite.
    pub fn new(u: GridFunction, v: GridFunction) -> Self {
        assert_eq!(u.grid(), v.grid(), "state components must share one grid");
        let finite = |w: &GridFunction| w.values().iter().all(|x| x.is_finite());
        assert!(finite(&u) && finite(&v), "state values must be finite");
        Self { u, v }
    }

    pub fn from_fns(
        grid: Grid,
        fu: impl Fn(Scalar) -> Scalar,
        fv: impl Fn(Scalar) -> Scalar,
    ) -> Self {
        Self::new(
            GridFunction::from_fn(grid, fu),
            GridFunction::from_fn(grid, fv),
        )
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            u: GridFunction::zeros(grid),
            v: GridFunction::zeros(grid),
        }
    }

    pub fn u(&self) -> &GridFunction {
        &self.u
    }

    pub fn v(&self) -> &GridFunction {
        &self.v
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }

    /// Product norm: the larger of the two sup norms.
    pub fn norm(&self) -> Scalar {
        self.u.max_abs().max(self.v.max_abs())
    }

    /// Product sup distance to another state on the same grid.
    pub fn distance(&self, other: &StatePair) -> Scalar {
        self.u
            .sup_distance(&other.u)
            .max(self.v.sup_distance(&other.v))
    }

    /// Componentwise convex blend `(1 - omega) self + omega other`.
    pub fn blend(&self, other: &StatePair, omega: Scalar) -> StatePair {
        StatePair {
            u: self.u.blend(&other.u, omega),
            v: self.v.blend(&other.v, omega),
        }
    }
}

/// Result of one full operator evaluation.
///
/// For states in the cone (both components nonnegative, `u` nonincreasing
/// and concave, `v` concave), `tu` is nonincreasing and `tv` attains its
/// maximum at a node within one grid cell of `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorOutput {
    pub tu: GridFunction,
    pub tv: GridFunction,
    /// Turning point of the second component, in `[0, 1]`.
    pub sigma: Scalar,
    /// Total error charged by the adaptive endpoint cells; zero when both
    /// weights are sampled by trapezoid only. The trapezoid discretization
    /// error itself is governed by the grid size and measured by
    /// refinement, not estimated here.
    pub quadrature_error_estimate: Scalar,
}

impl OperatorOutput {
    /// Repackage the output as a state for the next fixed-point step.
    /// Panics when the output is non-finite, like [`StatePair::new`].
    pub fn into_state(self) -> StatePair {
        StatePair::new(self.tu, self.tv)
    }
}

/// Errors raised while evaluating the operator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    /// A weight or nonlinearity failed to evaluate at a grid node.
    #[error("{formula} failed to evaluate at t = {t}: {source}")]
    Eval {
        formula: &'static str,
        t: Scalar,
        source: EvalError,
    },

    /// A boundary map failed to evaluate at its argument.
    #[error("{formula} failed to evaluate at w = {w}: {source}")]
    Boundary {
        formula: &'static str,
        w: Scalar,
        source: EvalError,
    },

    /// Quadrature or root finding failed. Quadrature failures can only
    /// come from the adaptive endpoint cells of a singular weight; a
    /// missing root means the matching equation never changed sign, which
    /// requires forcing data outside the validated class.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Cumulative mass `W(t_k)` of one weighted forcing along the grid.
struct Prefix {
    cum: GridFunction,
    quad_err: Scalar,
}

/// The fixed-point operator for one problem instance.
///
/// Uses `quad_tol`, `root_tol`, `scan_points` and the singularity flags
/// from the numerics config; the evaluation grid is taken from the state,
/// so the same operator serves refinement studies at several resolutions.
#[derive(Debug, Clone)]
pub struct Operator<'a> {
    spec: &'a ProblemSpec,
    numerics: &'a NumericsConfig,
    lap1: PLaplacian<Scalar>,
    lap2: PLaplacian<Scalar>,
}

impl<'a> Operator<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        numerics: &'a NumericsConfig,
    ) -> Result<Self, OperatorError> {
        Ok(Self {
            spec,
            numerics,
            lap1: PLaplacian::new(spec.p1)?,
            lap2: PLaplacian::new(spec.p2)?,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// Full evaluation: both components, the turning point and the
    /// accumulated quadrature error.
    pub fn apply(&self, state: &StatePair) -> Result<OperatorOutput, OperatorError> {
        let pre1 = self.weighted_prefix(1, state)?;
        let tu = self.first_component(&pre1)?;
        let pre2 = self.weighted_prefix(2, state)?;
        let sigma = self.turning_point(&pre2)?;
        let tv = self.second_component(&pre2, sigma)?;
        Ok(OperatorOutput {
            tu,
            tv,
            sigma,
            quadrature_error_estimate: pre1.quad_err + pre2.quad_err,
        })
    }

    /// First component only.
    pub fn eval_t1(&self, state: &StatePair) -> Result<GridFunction, OperatorError> {
        let pre = self.weighted_prefix(1, state)?;
        self.first_component(&pre)
    }

    /// Turning point of the second component. Defined as 0 when the
    /// weighted forcing vanishes on the whole grid (any point matches
    /// then, and the leftmost is 0).
    pub fn sigma(&self, state: &StatePair) -> Result<Scalar, OperatorError> {
        let pre = self.weighted_prefix(2, state)?;
        self.turning_point(&pre)
    }

    /// Second component together with its turning point.
    pub fn eval_t2(&self, state: &StatePair) -> Result<(GridFunction, Scalar), OperatorError> {
        let pre = self.weighted_prefix(2, state)?;
        let sigma = self.turning_point(&pre)?;
        Ok((self.second_component(&pre, sigma)?, sigma))
    }

    /// Fixed-point defect `max(sup |u - Tu|, sup |v - Tv|)`.
    pub fn residual(&self, state: &StatePair) -> Result<Scalar, OperatorError> {
        let out = self.apply(state)?;
        Ok(state
            .u
            .sup_distance(&out.tu)
            .max(state.v.sup_distance(&out.tv)))
    }

    /// Nodal samples of `g*f` folded into a cumulative trapezoid integral.
    /// For a weight declared endpoint-singular the two outermost cells are
    /// integrated adaptively (with `u`, `v` interpolated) and the endpoint
    /// samples are never evaluated.
    fn weighted_prefix(&self, which: usize, state: &StatePair) -> Result<Prefix, OperatorError> {
        let grid = state.grid();
        let n = grid.n_intervals();
        let h: Scalar = grid.spacing();
        let singular = if which == 1 {
            self.numerics.g1_singular
        } else {
            self.numerics.g2_singular
        };
        let (g_name, f_name) = if which == 1 { ("g1", "f1") } else { ("g2", "f2") };

        let mut samples = vec![0.0; n + 1];
        for (k, slot) in samples.iter_mut().enumerate() {
            if singular && (k == 0 || k == n) {
                continue;
            }
            let t = grid.node::<Scalar>(k);
            let g = self
                .spec
                .weight(which, t)
                .map_err(|source| OperatorError::Eval { formula: g_name, t, source })?;
            let f = self
                .spec
                .nonlinearity(which, t, state.u.values()[k], state.v.values()[k])
                .map_err(|source| OperatorError::Eval { formula: f_name, t, source })?;
            *slot = g * f;
        }

        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut quad_err = 0.0;
        cum.push(acc);
        for k in 0..n {
            let mass = if singular && (k == 0 || k == n - 1) {
                let lo = grid.node::<Scalar>(k);
                let hi = grid.node::<Scalar>(k + 1);
                let integrand = |tau: Scalar| {
                    let g = self.spec.weight(which, tau).unwrap_or(Scalar::NAN);
                    let f = self
                        .spec
                        .nonlinearity(which, tau, state.u.at(tau), state.v.at(tau))
                        .unwrap_or(Scalar::NAN);
                    g * f
                };
                let est = integrate_full(&integrand, lo, hi, self.numerics.quad_tol);
                if !est.value.is_finite() {
                    return Err(NumericsError::QuadratureNoConvergence {
                        best: est.value,
                        estimate: est.error_estimate,
                    }
                    .into());
                }
                quad_err += est.error_estimate;
                est.value
            } else {
                h * 0.5 * (samples[k] + samples[k + 1])
            };
            acc += mass;
            cum.push(acc);
        }
        Ok(Prefix {
            cum: GridFunction::new(grid, cum),
            quad_err,
        })
    }

    fn boundary_term(&self, which: usize, w: Scalar) -> Result<Scalar, OperatorError> {
        let formula = if which == 1 { "B1" } else { "B2" };
        self.spec
            .boundary(which, w)
            .map_err(|source| OperatorError::Boundary { formula, w, source })
    }

    /// `Tu(t_k) = int_{t_k}^1 phi_inv(W(s)) ds + B1(phi_inv(W(1)))`.
    fn first_component(&self, pre: &Prefix) -> Result<GridFunction, OperatorError> {
        let grid = pre.cum.grid();
        let q = GridFunction::new(
            grid,
            pre.cum.values().iter().map(|w| self.lap1.phi_inv(*w)).collect(),
        );
        let b = self.boundary_term(1, *q.values().last().unwrap())?;
        let prefix = cumulative_integral(&q);
        let total = *prefix.values().last().unwrap();
        let values = prefix.values().iter().map(|p| total - p + b).collect();
        Ok(GridFunction::new(grid, values))
    }

    /// Mismatch between the two branch formulas evaluated at `x`: the
    /// prefix branch `int_0^x phi_inv(W(x) - W(s)) ds + B2(phi_inv(W(x)))`
    /// minus the tail branch `int_x^1 phi_inv(W(s) - W(x)) ds`. Negative
    /// at 0 and nonnegative at 1 whenever the forcing is nonnegative, so
    /// the leftmost zero is the turning point.
    fn matching_defect(&self, pre: &Prefix, x: Scalar) -> Result<Scalar, OperatorError> {
        let grid = pre.cum.grid();
        let n = grid.n_intervals();
        let h: Scalar = grid.spacing();
        let w = pre.cum.values();
        let wx = pre.cum.at(x);
        let j = last_node_at_or_below(grid, x);

        // prefix branch: full cells up to t_j, then the partial cell
        // [t_j, x]; the integrand vanishes at s = x
        let mut lhs = 0.0;
        let mut prev = self.lap2.phi_inv(wx - w[0]);
        for wk in &w[1..=j] {
            let cur = self.lap2.phi_inv(wx - wk);
            lhs += h * 0.5 * (prev + cur);
            prev = cur;
        }
        lhs += (x - grid.node::<Scalar>(j)) * 0.5 * prev;
        let b = self.boundary_term(2, self.lap2.phi_inv(wx))?;

        // tail branch: partial cell [x, t_{j+1}], then full cells
        let mut rhs = 0.0;
        if j < n {
            let mut prev = self.lap2.phi_inv(w[j + 1] - wx);
            rhs += (grid.node::<Scalar>(j + 1) - x) * 0.5 * prev;
            for wk in &w[j + 2..=n] {
                let cur = self.lap2.phi_inv(wk - wx);
                rhs += h * 0.5 * (prev + cur);
                prev = cur;
            }
        }
        Ok(lhs + b - rhs)
    }

    fn turning_point(&self, pre: &Prefix) -> Result<Scalar, OperatorError> {
        if pre.cum.values().iter().all(|w| *w == 0.0) {
            return Ok(0.0);
        }
        // The root finder wants a plain scalar function; expression
        // failures park the first error here and poison the value.
        let failure: RefCell<Option<OperatorError>> = RefCell::new(None);
        let defect = |x: Scalar| match self.matching_defect(pre, x) {
            Ok(d) => d,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Scalar::NAN
            }
        };
        let found = find_smallest_root(
            defect,
            0.0,
            1.0,
            self.numerics.scan_points,
            self.numerics.root_tol,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(found?)
    }

    /// Both branches of the second component, split at the turning point:
    /// nodes at or below it integrate from 0, nodes above integrate to 1.
    /// No node needs a partial cell; the branches agree at `sigma` within
    /// the root tolerance, so the junction stays continuous and concave.
    fn second_component(
        &self,
        pre: &Prefix,
        sigma: Scalar,
    ) -> Result<GridFunction, OperatorError> {
        let grid = pre.cum.grid();
        let n = grid.n_intervals();
        let h: Scalar = grid.spacing();
        let w = pre.cum.values();
        let w_sigma = pre.cum.at(sigma);
        let b = self.boundary_term(2, self.lap2.phi_inv(w_sigma))?;
        let j = last_node_at_or_below(grid, sigma);

        let mut values = vec![0.0; n + 1];
        let mut acc = 0.0;
        let mut prev = self.lap2.phi_inv(w_sigma - w[0]);
        values[0] = b;
        for k in 1..=j {
            let cur = self.lap2.phi_inv(w_sigma - w[k]);
            acc += h * 0.5 * (prev + cur);
            values[k] = acc + b;
            prev = cur;
        }
        if j < n {
            let mut acc = 0.0;
            let mut prev = self.lap2.phi_inv(w[n] - w_sigma);
            for k in (j + 1..n).rev() {
                let cur = self.lap2.phi_inv(w[k] - w_sigma);
                acc += h * 0.5 * (cur + prev);
                values[k] = acc;
                prev = cur;
            }
        }
        Ok(GridFunction::new(grid, values))
    }
}

/// Largest node index whose coordinate does not exceed `x`.
fn last_node_at_or_below(grid: Grid, x: Scalar) -> usize {
    let j = grid.cell_of(x);
    if grid.node::<Scalar>(j + 1) <= x {
        j + 1
    } else {
        j
    }
}

/// One membership check: the worst violation found, its location, and
/// whether it stays within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCheck {
    pub pass: bool,
    /// Largest amount by which the inequality fails; 0 when clean.
    pub worst_violation: Scalar,
    /// Node where the worst violation occurs, when there is one.
    pub witness: Option<Scalar>,
}

/// Discrete cone diagnostics for a state, all at one explicit tolerance.
///
/// The first component must be nonnegative, nonincreasing and concave and
/// dominate `(1 - t) * sup` on the first window `[0, b1]`; the second must
/// be nonnegative and concave and dominate `min(t, 1 - t) * sup` on the
/// second window `[a2, b2]`. Concavity is checked through second
/// differences, monotonicity through adjacent differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub nonneg_u: ConeCheck,
    pub nonneg_v: ConeCheck,
    pub nonincreasing_u: ConeCheck,
    pub concave_u: ConeCheck,
    pub concave_v: ConeCheck,
    pub lower_bound_u: ConeCheck,
    pub lower_bound_v: ConeCheck,
    /// Tolerance all seven verdicts were computed with.
    pub tol: Scalar,
}

impl ConeReport {
    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.pass)
    }

    pub fn checks(&self) -> [(&'static str, &ConeCheck); 7] {
        [
            ("nonneg_u", &self.nonneg_u),
            ("nonneg_v", &self.nonneg_v),
            ("nonincreasing_u", &self.nonincreasing_u),
            ("concave_u", &self.concave_u),
            ("concave_v", &self.concave_v),
            ("lower_bound_u", &self.lower_bound_u),
            ("lower_bound_v", &self.lower_bound_v),
        ]
    }
}

/// Running maximum of a violation together with where it happened.
struct Worst {
    violation: Scalar,
    at: Option<Scalar>,
}

impl Worst {
    fn new() -> Self {
        Self {
            violation: 0.0,
            at: None,
        }
    }

    fn note(&mut self, violation: Scalar, t: Scalar) {
        if violation > self.violation {
            self.violation = violation;
            self.at = Some(t);
        }
    }

    fn into_check(self, tol: Scalar) -> ConeCheck {
        ConeCheck {
            pass: self.violation <= tol,
            worst_violation: self.violation,
            witness: self.at,
        }
    }
}

/// Check a state against the solution cone at the given tolerance. The
/// windows and their lower-bound constants come from the problem spec.
pub fn cone_membership(spec: &ProblemSpec, state: &StatePair, tol: Scalar) -> ConeReport {
    let grid = state.grid();
    let n = grid.n_intervals();
    let u = state.u().values();
    let v = state.v().values();
    let node = |k: usize| grid.node::<Scalar>(k);

    let mut nonneg_u = Worst::new();
    let mut nonneg_v = Worst::new();
    for k in 0..=n {
        nonneg_u.note(-u[k], node(k));
        nonneg_v.note(-v[k], node(k));
    }

    let mut nonincreasing_u = Worst::new();
    for k in 0..n {
        nonincreasing_u.note(u[k + 1] - u[k], node(k + 1));
    }

    let mut concave_u = Worst::new();
    let mut concave_v = Worst::new();
    for k in 1..n {
        concave_u.note(u[k + 1] - 2.0 * u[k] + u[k - 1], node(k));
        concave_v.note(v[k + 1] - 2.0 * v[k] + v[k - 1], node(k));
    }

    let norm_u = state.u().max_abs();
    let norm_v = state.v().max_abs();
    let mut lower_bound_u = Worst::new();
    let mut lower_bound_v = Worst::new();
    for k in 0..=n {
        let t = node(k);
        if t <= spec.b1 {
            lower_bound_u.note((1.0 - t) * norm_u - u[k], t);
        }
        if t >= spec.a2 && t <= spec.b2 {
            lower_bound_v.note(t.min(1.0 - t) * norm_v - v[k], t);
        }
    }

    ConeReport {
        nonneg_u: nonneg_u.into_check(tol),
        nonneg_v: nonneg_v.into_check(tol),
        nonincreasing_u: nonincreasing_u.into_check(tol),
        concave_u: concave_u.into_check(tol),
        concave_v: concave_v.into_check(tol),
        lower_bound_u: lower_bound_u.into_check(tol),
        lower_bound_v: lower_bound_v.into_check(tol),
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::EvalError;
    use crate::problem::{example_config, Formula};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn formula(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn spec_from(
        p1: Scalar,
        p2: Scalar,
        g1: &str,
        g2: &str,
        f1: &str,
        f2: &str,
        b1: &str,
        b2: &str,
    ) -> ProblemSpec {
        ProblemSpec {
            p1,
            p2,
            g1: formula(g1),
            g2: formula(g2),
            f1: formula(f1),
            f2: formula(f2),
            bc1: formula(b1),
            bc2: formula(b2),
            b1: 2.0 / 3.0,
            a2: 0.25,
            b2: 0.75,
            h11: 0.0,
            h12: 1.0,
            h21: 0.0,
            h22: 1.0,
        }
    }

    fn defaults() -> NumericsConfig {
        NumericsConfig::default()
    }

    fn argmax(f: &GridFunction) -> usize {
        f.values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn zero_forcing_maps_to_zero() {
        let example = example_config().problem;
        let mut spec = example.clone();
        spec.f1 = formula("0");
        spec.f2 = formula("0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let state = StatePair::from_fns(Grid::new(64), |t| 1.0 - t, |t| t * (1.0 - t));
        let out = op.apply(&state).unwrap();
        assert_eq!(out.sigma, 0.0);
        assert_eq!(out.quadrature_error_estimate, 0.0);
        assert!(out.tu.values().iter().all(|x| *x == 0.0), "{:?}", out.tu);
        assert!(out.tv.values().iter().all(|x| *x == 0.0), "{:?}", out.tv);
    }

    #[test]
    fn constant_forcing_first_component_closed_form() {
        // the cumulative mass is linear and the outer integrand is linear,
        // so the trapezoid rule is exact: Tu(t) = (1 - t^2) / 2
        let spec = spec_from(2.0, 2.0, "1", "1", "1", "1", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let grid = Grid::new(64);
        let tu = op.eval_t1(&StatePair::zeros(grid)).unwrap();
        for k in 0..=grid.n_intervals() {
            let t: Scalar = grid.node(k);
            let exact = (1.0 - t * t) / 2.0;
            assert!((tu.values()[k] - exact).abs() <= 1e-12, "node {k}");
        }
        assert!((tu.values()[0] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn example_first_component_value_at_origin() {
        let cfg = example_config();
        let op = Operator::new(&cfg.problem, &cfg.numerics).unwrap();
        let tu = op.eval_t1(&StatePair::zeros(Grid::new(1024))).unwrap();
        assert!(
            (tu.values()[0] - 0.24300).abs() <= 1e-6,
            "got {}",
            tu.values()[0]
        );
    }

    #[test]
    fn symmetric_mass_turning_point_is_half() {
        let spec = spec_from(2.0, 3.0, "1", "1", "1", "3", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let sigma = op.sigma(&StatePair::zeros(Grid::new(256))).unwrap();
        assert!((sigma - 0.5).abs() <= 1e-8, "got {sigma}");
    }

    #[test]
    fn boundary_term_pulls_turning_point_left() {
        // closed form: the matching defect is (4/3) x - 1/2, root 0.375
        let spec = spec_from(2.0, 2.0, "1", "1", "1", "1", "0", "w/3");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let sigma = op.sigma(&StatePair::zeros(Grid::new(256))).unwrap();
        assert!((sigma - 0.375).abs() <= 1e-6, "got {sigma}");
        assert!(sigma < 0.5);
    }

    #[test]
    fn constant_forcing_second_component_closed_form() {
        let spec = spec_from(2.0, 2.0, "1", "1", "1", "1", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let grid = Grid::new(64);
        let (tv, sigma) = op.eval_t2(&StatePair::zeros(grid)).unwrap();
        assert!((sigma - 0.5).abs() <= 1e-9);
        for k in 0..=grid.n_intervals() {
            let t: Scalar = grid.node(k);
            let exact = t * (1.0 - t) / 2.0;
            assert!((tv.values()[k] - exact).abs() <= 1e-9, "node {k}");
        }
        let m = argmax(&tv);
        assert!((tv.values()[m] - 0.125).abs() <= 1e-9);
        let tm: Scalar = grid.node(m);
        assert!((tm - sigma).abs() <= grid.spacing::<Scalar>());
    }

    #[test]
    fn branch_values_agree_at_turning_point() {
        let cfg = example_config();
        let op = Operator::new(&cfg.problem, &cfg.numerics).unwrap();
        let state = StatePair::from_fns(Grid::new(512), |_| 1.0, |_| 1.0);
        let pre = op.weighted_prefix(2, &state).unwrap();
        let sigma = op.turning_point(&pre).unwrap();
        let defect = op.matching_defect(&pre, sigma).unwrap();
        assert!(defect.abs() <= 1e-6, "defect {defect} at sigma {sigma}");
    }

    #[test]
    fn residual_vanishes_at_closed_form_fixed_point() {
        // with constant forcing the operator is a constant map, so its
        // value at any state is the unique fixed point
        let spec = spec_from(2.0, 2.0, "1", "1", "1", "1", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let grid = Grid::new(1024);
        let fixed = StatePair::from_fns(grid, |t| (1.0 - t * t) / 2.0, |t| t * (1.0 - t) / 2.0);
        let res = op.residual(&fixed).unwrap();
        assert!(res <= 2e-4, "residual {res}");
    }

    #[test]
    fn zero_state_has_positive_residual() {
        let cfg = example_config();
        let op = Operator::new(&cfg.problem, &cfg.numerics).unwrap();
        let res = op.residual(&StatePair::zeros(Grid::new(256))).unwrap();
        assert!((res - 0.243).abs() <= 1e-3, "residual {res}");
    }

    #[test]
    fn residual_refinement_is_second_order() {
        let spec = spec_from(2.0, 2.0, "1", "1+t", "1+u+v", "2+u*v", "w/4", "w/3");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let res = |n: usize| {
            let state = StatePair::from_fns(Grid::new(n), |t| 1.0 - t, |t| t * (1.0 - t));
            op.residual(&state).unwrap()
        };
        let (r64, r128, r256) = (res(64), res(128), res(256));
        let d1 = (r64 - r128).abs();
        let d2 = (r128 - r256).abs();
        assert!(d1 > 1e-12, "refinement steps too close: {r64} {r128} {r256}");
        assert!(d2 <= 0.4 * d1, "d1 {d1} d2 {d2}");
    }

    #[test]
    fn singular_weight_cells_use_adaptive_quadrature() {
        // g1(t) = 1/sqrt(t): Tu(t) = (4/3)(1 - t^{3/2}) in closed form
        let spec = spec_from(2.0, 2.0, "t^-0.5", "1", "1", "1", "0", "0");
        let mut numerics = defaults();
        numerics.g1_singular = true;
        let op = Operator::new(&spec, &numerics).unwrap();
        let grid = Grid::new(1024);
        let state = StatePair::zeros(grid);
        let tu = op.eval_t1(&state).unwrap();
        let mut worst: Scalar = 0.0;
        for k in 0..=grid.n_intervals() {
            let t: Scalar = grid.node(k);
            let exact = (4.0 / 3.0) * (1.0 - t.powf(1.5));
            worst = worst.max((tu.values()[k] - exact).abs());
        }
        assert!(worst <= 5e-3, "sup error {worst}");
        assert!((tu.values()[0] - 4.0 / 3.0).abs() <= 5e-3);

        // without the declaration, the endpoint sample itself fails
        let plain = defaults();
        let op = Operator::new(&spec, &plain).unwrap();
        match op.eval_t1(&state).unwrap_err() {
            OperatorError::Eval { formula, t, .. } => {
                assert_eq!(formula, "g1");
                assert_eq!(t, 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn affine_weight_turning_point_is_superconvergent() {
        // for g2(t) = 1 + t the turning-point shift cancels the trapezoid
        // error of the branch integrals exactly, so the output matches the
        // closed form t*F(sigma) - t^2/2 - t^3/6 (with F(x) = x + x^2/2 and
        // sigma solving F(x) = 2/3) down to the root tolerance
        let spec = spec_from(2.0, 2.0, "1", "1+t", "0", "1", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let sigma_exact = (7.0_f64 / 3.0).sqrt() - 1.0;
        let grid = Grid::new(64);
        // sigma itself shifts by O(h^2); only the output is superconvergent
        let (tv, sigma) = op.eval_t2(&StatePair::zeros(grid)).unwrap();
        assert!((sigma - sigma_exact).abs() <= 1e-4, "sigma {sigma}");
        let mass = sigma_exact + sigma_exact * sigma_exact / 2.0;
        for k in 0..=grid.n_intervals() {
            let t: Scalar = grid.node(k);
            let exact = if t <= sigma_exact {
                t * mass - t * t / 2.0 - t * t * t / 6.0
            } else {
                2.0 / 3.0 - t * t / 2.0 - t * t * t / 6.0 - (1.0 - t) * mass
            };
            assert!((tv.values()[k] - exact).abs() <= 1e-8, "node {k}");
        }
    }

    #[test]
    fn quadratic_weight_second_component_grid_convergence() {
        // g2(t) = 1 + t^2 with unit forcing: the cumulative-mass error no
        // longer cancels and the output error is h^2/6 * t(1-t), a clean
        // second-order signal; the turning point solves x + x^3/3 = 7/12
        let spec = spec_from(2.0, 2.0, "1", "1+t^2", "0", "1", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let mut sigma_exact: Scalar = 0.5;
        for _ in 0..8 {
            let f = sigma_exact + sigma_exact.powi(3) / 3.0 - 7.0 / 12.0;
            sigma_exact -= f / (1.0 + sigma_exact * sigma_exact);
        }
        let mass = |x: Scalar| x + x * x * x / 3.0;
        let mass_prefix = |x: Scalar| x * x / 2.0 + x.powi(4) / 12.0;
        let exact = |t: Scalar| {
            if t <= sigma_exact {
                t * mass(sigma_exact) - mass_prefix(t)
            } else {
                mass_prefix(1.0) - mass_prefix(t) - (1.0 - t) * mass(sigma_exact)
            }
        };
        let sup_err = |n: usize| {
            let grid = Grid::new(n);
            let (tv, sigma) = op.eval_t2(&StatePair::zeros(grid)).unwrap();
            assert!((sigma - sigma_exact).abs() <= 1e-3, "sigma {sigma} at n {n}");
            let mut worst: Scalar = 0.0;
            for k in 0..=n {
                worst = worst.max((tv.values()[k] - exact(grid.node(k))).abs());
            }
            worst
        };
        let (e64, e128) = (sup_err(64), sup_err(128));
        let order = (e64 / e128).log2();
        assert!(order >= 1.9, "order {order} (errors {e64} vs {e128})");
    }

    #[test]
    fn cone_examples_classify_correctly() {
        let spec = example_config().problem;
        let grid = Grid::new(64);
        let good = StatePair::from_fns(grid, |t| 1.0 - t, |t| t * (1.0 - t));
        assert!(cone_membership(&spec, &good, 1e-12).all_pass());

        let rising = StatePair::from_fns(grid, |t| t, |t| t * (1.0 - t));
        let report = cone_membership(&spec, &rising, 1e-12);
        assert!(!report.nonincreasing_u.pass);
        assert!(report.nonincreasing_u.worst_violation > 0.0);
        assert!(report.nonincreasing_u.witness.unwrap() > 0.0);

        let bad_v = StatePair::from_fns(grid, |t| 1.0 - t, |t| t * t);
        let report = cone_membership(&spec, &bad_v, 1e-12);
        assert!(!report.concave_v.pass);

        let negative = StatePair::from_fns(grid, |t| 1.0 - t, |_| -1.0);
        assert!(!cone_membership(&spec, &negative, 1e-12).nonneg_v.pass);
    }

    #[test]
    fn operator_outputs_stay_in_cone() {
        let cfg = example_config();
        let op = Operator::new(&cfg.problem, &cfg.numerics).unwrap();
        let grid = Grid::new(256);
        let h: Scalar = grid.spacing();
        let mut rng = StdRng::seed_from_u64(42);
        for case in 0..50 {
            let amp_u = 0.1 + 4.9 * rng.gen::<Scalar>();
            let pow_u = 1.0 + 3.0 * rng.gen::<Scalar>();
            let amp_v = 0.1 + 4.9 * rng.gen::<Scalar>();
            let peak = 0.2 + 0.6 * rng.gen::<Scalar>();
            let state = StatePair::from_fns(
                grid,
                |t| amp_u * (1.0 - t.powf(pow_u)),
                |t| amp_v * (t / peak).min((1.0 - t) / (1.0 - peak)),
            );
            let out = op.apply(&state).unwrap();
            let norm = out.tu.max_abs().max(out.tv.max_abs());
            let m = argmax(&out.tv);
            let tm: Scalar = grid.node(m);
            assert!(
                (tm - out.sigma).abs() <= h + 1e-12,
                "case {case}: max at {tm}, sigma {}",
                out.sigma
            );
            let report = cone_membership(&cfg.problem, &out.into_state(), 1e-8 * norm);
            assert!(report.all_pass(), "case {case}: {report:#?}");
        }
    }

    #[test]
    fn scaling_up_second_forcing_does_not_shrink_output() {
        let base = example_config();
        let mut scaled_spec = base.problem.clone();
        scaled_spec.f2 = formula("5*(sqrt(t*u) + 10*v^9)");
        let op = Operator::new(&base.problem, &base.numerics).unwrap();
        let scaled = Operator::new(&scaled_spec, &base.numerics).unwrap();
        let state = StatePair::from_fns(Grid::new(128), |_| 1.0, |_| 0.5);
        let (tv, _) = op.eval_t2(&state).unwrap();
        let (tv5, _) = scaled.eval_t2(&state).unwrap();
        assert!(tv5.max_value() >= tv.max_value());
    }

    #[test]
    fn expression_failures_carry_node_location() {
        let spec = spec_from(2.0, 2.0, "1", "1", "1/t", "1", "0", "0");
        let numerics = defaults();
        let op = Operator::new(&spec, &numerics).unwrap();
        let state = StatePair::zeros(Grid::new(16));
        match op.eval_t1(&state).unwrap_err() {
            OperatorError::Eval { formula, t, source } => {
                assert_eq!(formula, "f1");
                assert_eq!(t, 0.0);
                assert_eq!(source, EvalError::DivisionByZero);
            }
            other => panic!("unexpected error {other:?}"),
        }

        let spec = spec_from(2.0, 2.0, "1", "1", "1", "1", "sqrt(w - 9)", "0");
        let op = Operator::new(&spec, &numerics).unwrap();
        match op.eval_t1(&state).unwrap_err() {
            OperatorError::Boundary { formula, w, .. } => {
                assert_eq!(formula, "B1");
                assert_eq!(w, 1.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn output_and_cone_report_round_trip_through_json() {
        let cfg = example_config();
        let op = Operator::new(&cfg.problem, &cfg.numerics).unwrap();
        let state = StatePair::from_fns(Grid::new(16), |t| 1.0 - t, |t| t * (1.0 - t));
        let out = op.apply(&state).unwrap();
        let json = serde_json::to_string(&out).unwrap();
        let back: OperatorOutput = serde_json::from_str(&json).unwrap();
        assert_eq!(out, back);

        let report = cone_membership(&cfg.problem, &state, 1e-10);
        let json = serde_json::to_string(&report).unwrap();
        let back: ConeReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    #[should_panic(expected = "share one grid")]
    fn mismatched_grids_are_rejected() {
        let _ = StatePair::new(
            GridFunction::zeros(Grid::new(4)),
            GridFunction::zeros(Grid::new(8)),
        );
    }
}
