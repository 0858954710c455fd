//! Cone constants, growth bounds and solution-count certificates.
//!
//! The fixed-point operator maps a cone of nonnegative profiles into itself;
//! on that cone each component satisfies the window inequality
//! `min over the window >= c_i * sup norm`. Comparing nonlinearity growth on
//! norm boxes `[0, rho1] x [0, rho2]` against the operator norm constants
//! `m_i` (small boxes) and `M_i` (window-restricted boxes) yields index
//! conditions; an alternating ladder of such boxes certifies a solution count
//! together with sup-norm localization intervals.
//!
//! All quantities here are estimates from finite sampling lattices and
//! adaptive quadrature. Certificates are reported as decisive only when every
//! strict inequality holds with a relative margin above [`MARGIN_FLOOR`].

use std::cell::RefCell;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::numerics::{integrate, minimize_1d, NumericsError, PLaplacian};
use crate::operator::StatePair;
use crate::problem::ProblemSpec;
use crate::Scalar;

/// Relative margin below which a strict inequality is treated as undecided.
pub const MARGIN_FLOOR: Scalar = 1e-9;

/// Absolute tolerance for the weight integrals behind the cone constants.
const QUAD_TOL: Scalar = 1e-11;
/// Argument tolerance for the inner minimization locating `nu_star`.
const NU_TOL: Scalar = 1e-10;
/// Points per axis of one refinement sub-lattice.
const REFINE_POINTS: usize = 9;
/// Hard cap on refinement passes around a lattice extremum.
const REFINE_MAX_PASSES: usize = 60;
/// Relative improvement under which refinement stops.
const REFINE_REL: Scalar = 1e-6;

/// Failure while computing certificate quantities.
#[derive(Debug, Error)]
pub enum CertificateError {
    /// A nonlinearity could not be evaluated at a sample point.
    #[error("formula {formula} failed at (t, u, v) = ({t}, {u}, {v}): {source}")]
    Eval {
        formula: &'static str,
        t: Scalar,
        u: Scalar,
        v: Scalar,
        source: EvalError,
    },
    /// A weight could not be evaluated strictly inside the domain.
    #[error("weight {formula} failed at t = {t}: {source}")]
    Weight {
        formula: &'static str,
        t: Scalar,
        source: EvalError,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    /// A cone constant came out non-finite or non-positive.
    #[error("constant {name} is degenerate (reciprocal came out as {reciprocal})")]
    Degenerate {
        name: &'static str,
        reciprocal: Scalar,
    },
}

/// Window and norm constants of the fixed-point operator on the cone.
///
/// `c1`, `c2` are the window constants; `m_i` bound the operator from above
/// on full boxes, `M_i` from below on window-restricted boxes. `Mt1`, `Mt2`
/// are the variants of `M1`, `M2` without the boundary flux terms, and
/// `nu_star` is the interior point at which the minimization defining `M2`
/// attains its minimum.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    pub c1: Scalar,
    pub c2: Scalar,
    pub m1: Scalar,
    pub m2: Scalar,
    pub M1: Scalar,
    pub M2: Scalar,
    pub Mt1: Scalar,
    pub Mt2: Scalar,
    pub nu_star: Scalar,
}

/// Weight integrals for one component, with failure parking.
///
/// Failures at the domain endpoints are returned as NaN so that the adaptive
/// quadrature can treat them as integrable endpoint singularities; failures
/// strictly inside the domain and quadrature breakdowns are parked and
/// re-raised by [`Self::take_failure`].
struct WeightIntegrals<'a> {
    spec: &'a ProblemSpec,
    which: usize,
    formula: &'static str,
    lap: PLaplacian<Scalar>,
    parked: RefCell<Option<CertificateError>>,
}

impl<'a> WeightIntegrals<'a> {
    fn new(spec: &'a ProblemSpec, which: usize) -> Result<Self, CertificateError> {
        let p = if which == 1 { spec.p1 } else { spec.p2 };
        Ok(Self {
            spec,
            which,
            formula: if which == 1 { "g1" } else { "g2" },
            lap: PLaplacian::new(p)?,
            parked: RefCell::new(None),
        })
    }

    fn park(&self, err: CertificateError) {
        let mut slot = self.parked.borrow_mut();
        if slot.is_none() {
            *slot = Some(err);
        }
    }

    fn sample(&self, t: Scalar) -> Scalar {
        match self.spec.weight(self.which, t) {
            Ok(w) => w,
            Err(source) => {
                if t != 0.0 && t != 1.0 {
                    self.park(CertificateError::Weight {
                        formula: self.formula,
                        t,
                        source,
                    });
                }
                Scalar::NAN
            }
        }
    }

    /// Integral of the weight over `[lo, hi]`, NaN when it cannot be formed.
    fn mass(&self, lo: Scalar, hi: Scalar) -> Scalar {
        match integrate(&|t| self.sample(t), lo, hi, QUAD_TOL) {
            Ok(v) => v,
            Err(err) => {
                self.park(CertificateError::Numerics(err));
                Scalar::NAN
            }
        }
    }

    fn phi_inv_mass(&self, lo: Scalar, hi: Scalar) -> Scalar {
        self.lap.phi_inv(self.mass(lo, hi))
    }

    /// `integral over s in [lo, hi] of phi_inv(mass(lo, s))`.
    fn ramp_from(&self, lo: Scalar, hi: Scalar) -> Scalar {
        match integrate(&|s| self.lap.phi_inv(self.mass(lo, s)), lo, hi, QUAD_TOL) {
            Ok(v) => v,
            Err(err) => {
                self.park(CertificateError::Numerics(err));
                Scalar::NAN
            }
        }
    }

    /// `integral over s in [lo, hi] of phi_inv(mass(s, hi))`.
    fn ramp_to(&self, lo: Scalar, hi: Scalar) -> Scalar {
        match integrate(&|s| self.lap.phi_inv(self.mass(s, hi)), lo, hi, QUAD_TOL) {
            Ok(v) => v,
            Err(err) => {
                self.park(CertificateError::Numerics(err));
                Scalar::NAN
            }
        }
    }

    fn take_failure(&self) -> Result<(), CertificateError> {
        match self.parked.borrow_mut().take() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }
}

fn recip(name: &'static str, reciprocal: Scalar) -> Result<Scalar, CertificateError> {
    if reciprocal.is_finite() && reciprocal > 0.0 {
        Ok(1.0 / reciprocal)
    } else {
        Err(CertificateError::Degenerate { name, reciprocal })
    }
}

/// Computes the cone constants of a well-formed problem.
///
/// The reciprocals are layered weight integrals: `1/m_i` integrates the
/// inverse homeomorphism of the cumulative weight over the full domain (with
/// the boundary flux term), `1/M_1` does the same over `[0, b1]`, and `1/M_2`
/// minimizes the two-sided ramp over an interior peak `nu` in `[a2, b2]`.
/// Weights may blow up at the endpoints `t = 0, 1` as long as they stay
/// integrable; failures strictly inside the domain are reported as errors.
pub fn compute_constants(spec: &ProblemSpec) -> Result<ConeConstants, CertificateError> {
    let c1 = 1.0 - spec.b1;
    let c2 = spec.a2.min(1.0 - spec.b2);

    let w1 = WeightIntegrals::new(spec, 1)?;
    let w2 = WeightIntegrals::new(spec, 2)?;

    let inv_m1 = w1.ramp_from(0.0, 1.0) + spec.h12 * w1.phi_inv_mass(0.0, 1.0);
    let inv_m2 = {
        let left = w2.ramp_to(0.0, 0.5) + spec.h22 * w2.phi_inv_mass(0.0, 0.5);
        let right = w2.ramp_from(0.5, 1.0);
        left.max(right)
    };

    let inv_big1_tilde = w1.ramp_from(0.0, spec.b1);
    let inv_big1 = inv_big1_tilde + spec.h11 * w1.phi_inv_mass(0.0, spec.b1);

    let two_sided = |nu: Scalar, with_flux: bool| {
        let mut total = w2.ramp_to(spec.a2, nu) + w2.ramp_from(nu, spec.b2);
        if with_flux {
            total += spec.h21 * w2.phi_inv_mass(spec.a2, nu);
        }
        total
    };
    let (nu_star, peak) = minimize_1d(|nu| two_sided(nu, true), spec.a2, spec.b2, NU_TOL);
    let inv_big2 = 0.5 * peak;
    let (_, peak_tilde) = minimize_1d(|nu| two_sided(nu, false), spec.a2, spec.b2, NU_TOL);
    let inv_big2_tilde = 0.5 * peak_tilde;

    w1.take_failure()?;
    w2.take_failure()?;

    Ok(ConeConstants {
        c1,
        c2,
        m1: recip("m1", inv_m1)?,
        m2: recip("m2", inv_m2)?,
        M1: recip("M1", inv_big1)?,
        M2: recip("M2", inv_big2)?,
        Mt1: recip("Mt1", inv_big1_tilde)?,
        Mt2: recip("Mt2", inv_big2_tilde)?,
        nu_star,
    })
}

/// Pair of sup-norm radii bounding a search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusBox {
    pub rho1: Scalar,
    pub rho2: Scalar,
}

impl RadiusBox {
    /// Panics unless both radii are positive and finite.
    pub fn new(rho1: Scalar, rho2: Scalar) -> Self {
        assert!(
            rho1 > 0.0 && rho1.is_finite() && rho2 > 0.0 && rho2.is_finite(),
            "radii must be positive and finite"
        );
        Self { rho1, rho2 }
    }
}

/// Which extremum of which nonlinearity a growth bound estimates.
///
/// `sup-I1-*` takes the supremum over the full box
/// `[0,1] x [0,rho1] x [0,rho2]`. `inf-I0-*` takes the infimum over the
/// component's window in `t` with its own variable restricted to
/// `[c_i rho_i, rho_i]`. `inf-I0star-*` keeps the full variable box but
/// restricts `t` to the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthKind {
    #[serde(rename = "sup-I1-f1")]
    SupI1F1,
    #[serde(rename = "sup-I1-f2")]
    SupI1F2,
    #[serde(rename = "inf-I0-f1")]
    InfI0F1,
    #[serde(rename = "inf-I0-f2")]
    InfI0F2,
    #[serde(rename = "inf-I0star-f1")]
    InfI0starF1,
    #[serde(rename = "inf-I0star-f2")]
    InfI0starF2,
}

impl GrowthKind {
    /// Component index (1 or 2) of the nonlinearity being bounded.
    pub fn component(self) -> usize {
        match self {
            Self::SupI1F1 | Self::InfI0F1 | Self::InfI0starF1 => 1,
            Self::SupI1F2 | Self::InfI0F2 | Self::InfI0starF2 => 2,
        }
    }

    /// Whether the estimate is a supremum (otherwise an infimum).
    pub fn is_sup(self) -> bool {
        matches!(self, Self::SupI1F1 | Self::SupI1F2)
    }

    /// Search ranges for `(t, u, v)`.
    fn axes(self, spec: &ProblemSpec, bx: RadiusBox) -> [(Scalar, Scalar); 3] {
        let c1 = 1.0 - spec.b1;
        let c2 = spec.a2.min(1.0 - spec.b2);
        let u_full = (0.0, bx.rho1);
        let v_full = (0.0, bx.rho2);
        match self {
            Self::SupI1F1 | Self::SupI1F2 => [(0.0, 1.0), u_full, v_full],
            Self::InfI0F1 => [(0.0, spec.b1), (c1 * bx.rho1, bx.rho1), v_full],
            Self::InfI0F2 => [(spec.a2, spec.b2), u_full, (c2 * bx.rho2, bx.rho2)],
            Self::InfI0starF1 => [(0.0, spec.b1), u_full, v_full],
            Self::InfI0starF2 => [(spec.a2, spec.b2), u_full, v_full],
        }
    }
}

/// Result of a lattice growth-bound search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub kind: GrowthKind,
    /// Raw extremum of the nonlinearity over the search box.
    pub extremum: Scalar,
    /// `extremum / rho_i^(p_i - 1)`; the quantity index conditions compare.
    pub value: Scalar,
    /// Sample point `(t, u, v)` attaining `extremum`.
    pub witness: (Scalar, Scalar, Scalar),
    /// Points per axis of the initial search lattice.
    pub resolution: usize,
    /// Whether local refinement improved on the initial lattice.
    pub refined: bool,
}

struct Extremum {
    value: Scalar,
    at: (Scalar, Scalar, Scalar),
}

fn lattice_node(axis: (Scalar, Scalar), k: usize, n: usize) -> Scalar {
    if k + 1 == n {
        axis.1
    } else {
        axis.0 + (axis.1 - axis.0) * k as Scalar / (n - 1) as Scalar
    }
}

/// Extremum over a lattice. Ties keep the first point in `(t, u, v)`
/// iteration order, so results do not depend on the degree of parallelism.
fn scan_box(
    spec: &ProblemSpec,
    which: usize,
    maximize: bool,
    axes: &[(Scalar, Scalar); 3],
    points: usize,
    parallel: bool,
) -> Result<Extremum, CertificateError> {
    let formula = if which == 1 { "f1" } else { "f2" };
    let scan_slice = |it: usize| -> Result<Extremum, CertificateError> {
        let t = lattice_node(axes[0], it, points);
        let mut best: Option<Extremum> = None;
        for iu in 0..points {
            let u = lattice_node(axes[1], iu, points);
            for iv in 0..points {
                let v = lattice_node(axes[2], iv, points);
                let value = spec.nonlinearity(which, t, u, v).map_err(|source| {
                    CertificateError::Eval {
                        formula,
                        t,
                        u,
                        v,
                        source,
                    }
                })?;
                let replace = match &best {
                    None => true,
                    Some(b) if maximize => value > b.value,
                    Some(b) => value < b.value,
                };
                if replace {
                    best = Some(Extremum { value, at: (t, u, v) });
                }
            }
        }
        Ok(best.expect("lattice has at least one point"))
    };

    let slices: Vec<Result<Extremum, CertificateError>> = if parallel {
        (0..points).into_par_iter().map(|it| scan_slice(it)).collect()
    } else {
        (0..points).map(|it| scan_slice(it)).collect()
    };

    let mut best: Option<Extremum> = None;
    for slice in slices {
        let cand = slice?;
        let replace = match &best {
            None => true,
            Some(b) if maximize => cand.value > b.value,
            Some(b) => cand.value < b.value,
        };
        if replace {
            best = Some(cand);
        }
    }
    Ok(best.expect("lattice has at least one slice"))
}

/// Estimates a nonlinearity extremum over the box selected by `kind`.
///
/// The initial lattice places `resolution` points per axis (endpoints
/// included); the best point is then refined on shrinking sub-lattices until
/// the relative improvement drops below an internal threshold. Finer lattices
/// and refinement can only sharpen the estimate: suprema are nondecreasing
/// and infima nonincreasing in the sampling effort.
pub fn growth_bound(
    spec: &ProblemSpec,
    kind: GrowthKind,
    bx: RadiusBox,
    resolution: usize,
) -> Result<GrowthEstimate, CertificateError> {
    assert!(resolution >= 2, "growth lattice needs at least two points per axis");
    assert!(
        bx.rho1 > 0.0 && bx.rho1.is_finite() && bx.rho2 > 0.0 && bx.rho2.is_finite(),
        "radii must be positive and finite"
    );
    let axes = kind.axes(spec, bx);
    let which = kind.component();
    let maximize = kind.is_sup();

    let mut best = scan_box(spec, which, maximize, &axes, resolution, true)?;
    let mut refined = false;
    let mut extent = [
        (axes[0].1 - axes[0].0) / (resolution - 1) as Scalar,
        (axes[1].1 - axes[1].0) / (resolution - 1) as Scalar,
        (axes[2].1 - axes[2].0) / (resolution - 1) as Scalar,
    ];
    for _ in 0..REFINE_MAX_PASSES {
        let sub = [
            (
                (best.at.0 - extent[0]).max(axes[0].0),
                (best.at.0 + extent[0]).min(axes[0].1),
            ),
            (
                (best.at.1 - extent[1]).max(axes[1].0),
                (best.at.1 + extent[1]).min(axes[1].1),
            ),
            (
                (best.at.2 - extent[2]).max(axes[2].0),
                (best.at.2 + extent[2]).min(axes[2].1),
            ),
        ];
        let cand = scan_box(spec, which, maximize, &sub, REFINE_POINTS, false)?;
        let better = if maximize {
            cand.value > best.value
        } else {
            cand.value < best.value
        };
        if !better {
            break;
        }
        let gain = (cand.value - best.value).abs();
        best = cand;
        refined = true;
        if gain <= REFINE_REL * best.value.abs().max(1e-12) {
            break;
        }
        for e in &mut extent {
            *e *= 0.5;
        }
    }

    let (p, rho) = if which == 1 {
        (spec.p1, bx.rho1)
    } else {
        (spec.p2, bx.rho2)
    };
    let scale = rho.powf(p - 1.0);
    Ok(GrowthEstimate {
        kind,
        extremum: best.value,
        value: best.value / scale,
        witness: best.at,
        resolution,
        refined,
    })
}

/// One growth estimate compared against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBound {
    /// Component index (1 or 2).
    pub component: usize,
    pub estimate: GrowthEstimate,
    /// `phi_{p_i}(m_i)` or `phi_{p_i}(M_i)` depending on the condition.
    pub threshold: Scalar,
    /// `|estimate.value - threshold|`.
    pub margin: Scalar,
    /// Whether the strict inequality holds at all.
    pub satisfied: bool,
    /// Whether it holds with a relative margin above [`MARGIN_FLOOR`].
    pub decisive: bool,
}

fn component_bound(estimate: GrowthEstimate, threshold: Scalar, below: bool) -> ComponentBound {
    let margin = (estimate.value - threshold).abs();
    let satisfied = if below {
        estimate.value < threshold
    } else {
        estimate.value > threshold
    };
    let scale = estimate.value.abs().max(threshold.abs());
    let decisive = satisfied && margin > MARGIN_FLOOR * scale;
    ComponentBound {
        component: estimate.kind.component(),
        estimate,
        threshold,
        margin,
        satisfied,
        decisive,
    }
}

/// Outcome of one index condition on one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub components: Vec<ComponentBound>,
    pub holds: bool,
    pub decisive: bool,
}

impl ConditionResult {
    /// Both components must satisfy their bound (conditions `I1`, `I0`).
    fn conjunction(components: Vec<ComponentBound>) -> Self {
        let holds = components.iter().all(|c| c.satisfied);
        let decisive = components.iter().all(|c| c.decisive);
        Self {
            components,
            holds,
            decisive,
        }
    }

    /// Some component must satisfy its bound (condition `I0star`).
    fn disjunction(components: Vec<ComponentBound>) -> Self {
        let holds = components.iter().any(|c| c.satisfied);
        let decisive = components.iter().any(|c| c.decisive);
        Self {
            components,
            holds,
            decisive,
        }
    }
}

/// The three index conditions evaluated on one radius box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConditions {
    pub rho1: Scalar,
    pub rho2: Scalar,
    /// Sup bounds below `phi_{p_i}(m_i)` for both components.
    pub i1: ConditionResult,
    /// Window inf bounds above `phi_{p_i}(M_i)` for both components.
    pub i0: ConditionResult,
    /// Full-box window inf above `phi_{p_i}(M_i)` for some component.
    pub i0star: ConditionResult,
}

/// Evaluates all three index conditions on one box.
pub fn check_index_conditions(
    spec: &ProblemSpec,
    constants: &ConeConstants,
    bx: RadiusBox,
    resolution: usize,
) -> Result<IndexConditions, CertificateError> {
    let lap1 = PLaplacian::new(spec.p1)?;
    let lap2 = PLaplacian::new(spec.p2)?;
    let small = [lap1.phi(constants.m1), lap2.phi(constants.m2)];
    let large = [lap1.phi(constants.M1), lap2.phi(constants.M2)];

    let bound = |kind: GrowthKind, threshold: Scalar, below: bool| {
        growth_bound(spec, kind, bx, resolution).map(|e| component_bound(e, threshold, below))
    };

    let i1 = ConditionResult::conjunction(vec![
        bound(GrowthKind::SupI1F1, small[0], true)?,
        bound(GrowthKind::SupI1F2, small[1], true)?,
    ]);
    let i0 = ConditionResult::conjunction(vec![
        bound(GrowthKind::InfI0F1, large[0], false)?,
        bound(GrowthKind::InfI0F2, large[1], false)?,
    ]);
    let i0star = ConditionResult::disjunction(vec![
        bound(GrowthKind::InfI0starF1, large[0], false)?,
        bound(GrowthKind::InfI0starF2, large[1], false)?,
    ]);

    Ok(IndexConditions {
        rho1: bx.rho1,
        rho2: bx.rho2,
        i1,
        i0,
        i0star,
    })
}

/// Which index condition a ladder rung claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionTag {
    I1,
    I0,
    I0star,
}

impl fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::I1 => "I1",
            Self::I0 => "I0",
            Self::I0star => "I0star",
        })
    }
}

/// One rung of a certification ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub radii: RadiusBox,
    pub tag: ConditionTag,
}

/// What a certificate concludes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Conclusion {
    /// At least `count` distinct solutions, one per certified annulus.
    Solutions { pattern: String, count: usize },
    /// A sampled nonexistence condition held on the whole sample lattice.
    Nonexistence { case: u8 },
    Inconclusive { reason: String },
}

/// Half-open product-norm interval `(lo, hi]` containing a solution norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormInterval {
    pub lo: Scalar,
    pub hi: Scalar,
}

/// Shape of a localization set: a norm box `K` or a window set `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetKind {
    K,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    pub kind: SetKind,
    pub rho1: Scalar,
    pub rho2: Scalar,
}

/// Solution annulus: the closure of `outer` minus `inner`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub inner: SetSpec,
    pub outer: SetSpec,
}

/// Evaluated conditions for one ladder rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungReport {
    pub tag: ConditionTag,
    pub conditions: IndexConditions,
}

/// Full outcome of a ladder certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub constants: ConeConstants,
    pub margin_floor: Scalar,
    pub resolution: usize,
    pub rungs: Vec<RungReport>,
    pub conclusion: Conclusion,
    /// One product-norm interval per certified solution, ordered and disjoint.
    pub localization: Vec<NormInterval>,
    /// One annulus per certified solution.
    pub regions: Vec<RegionRecord>,
}

fn parity(tag: ConditionTag) -> u8 {
    match tag {
        ConditionTag::I1 => 1,
        ConditionTag::I0 | ConditionTag::I0star => 0,
    }
}

fn pattern_name(first: u8, len: usize) -> String {
    match (len, first) {
        (2, 0) => "S1".into(),
        (2, 1) => "S2".into(),
        (3, 0) => "S3".into(),
        (3, 1) => "S4".into(),
        (4, 0) => "S5".into(),
        (4, 1) => "S6".into(),
        _ => "extended alternation".into(),
    }
}

fn radius_names(len: usize) -> Vec<String> {
    if len <= 4 {
        ["rho", "r", "s", "delta"]
            .iter()
            .take(len)
            .map(|s| s.to_string())
            .collect()
    } else {
        (1..=len).map(|k| format!("rung{k}")).collect()
    }
}

fn conclude(
    constants: &ConeConstants,
    ladder: &[LadderRung],
    rungs: &[RungReport],
) -> (Conclusion, Vec<NormInterval>, Vec<RegionRecord>) {
    let inconclusive = |reason: String| (Conclusion::Inconclusive { reason }, Vec::new(), Vec::new());

    if ladder.len() < 2 {
        return inconclusive("no S-pattern matched: a ladder needs at least two rungs".into());
    }
    for (k, rung) in ladder.iter().enumerate().skip(1) {
        if rung.tag == ConditionTag::I0star {
            return inconclusive(format!(
                "no S-pattern matched: I0star is only allowed on the first rung, not rung {}",
                k + 1
            ));
        }
    }
    let parities: Vec<u8> = ladder.iter().map(|r| parity(r.tag)).collect();
    for k in 0..parities.len() - 1 {
        if parities[k] == parities[k + 1] {
            return inconclusive(format!(
                "no S-pattern matched: rungs {} and {} play the same index role",
                k + 1,
                k + 2
            ));
        }
    }

    let pattern = pattern_name(parities[0], ladder.len());
    let names = radius_names(ladder.len());
    let mut problems: Vec<String> = Vec::new();

    // Gap rules between consecutive rungs: plain `x_i < y_i` going from a
    // zero-index rung up, scaled `x_i < c_i y_i` going from a one-index rung
    // up (the window inequality must pull the outer set past the inner box).
    for k in 0..ladder.len() - 1 {
        let x = ladder[k].radii;
        let y = ladder[k + 1].radii;
        let scaled = parities[k] == 1;
        for i in 0..2 {
            let (xi, yi) = if i == 0 { (x.rho1, y.rho1) } else { (x.rho2, y.rho2) };
            let ci = if i == 0 { constants.c1 } else { constants.c2 };
            let limit = if scaled { ci * yi } else { yi };
            if !(limit - xi > MARGIN_FLOOR * xi.abs().max(limit.abs())) {
                let relation = if scaled {
                    format!("{}{} < c{}*{}{}", names[k], i + 1, i + 1, names[k + 1], i + 1)
                } else {
                    format!("{}{} < {}{}", names[k], i + 1, names[k + 1], i + 1)
                };
                problems.push(format!(
                    "{pattern} requires {relation} = {}; got {}",
                    crate::sig9(limit),
                    crate::sig9(xi)
                ));
            }
        }
    }

    for (k, rung) in rungs.iter().enumerate() {
        let cond = match rung.tag {
            ConditionTag::I1 => &rung.conditions.i1,
            ConditionTag::I0 => &rung.conditions.i0,
            ConditionTag::I0star => &rung.conditions.i0star,
        };
        if !cond.holds {
            for c in cond.components.iter().filter(|c| !c.satisfied) {
                problems.push(format!(
                    "rung {} ({}) fails: f{} bound {} vs threshold {}",
                    k + 1,
                    rung.tag,
                    c.component,
                    crate::sig9(c.estimate.value),
                    crate::sig9(c.threshold)
                ));
            }
        } else if !cond.decisive {
            problems.push(format!(
                "rung {} ({}) holds only within the margin floor {}",
                k + 1,
                rung.tag,
                MARGIN_FLOOR
            ));
        }
    }

    if !problems.is_empty() {
        return inconclusive(problems.join("; "));
    }

    let mut localization = Vec::new();
    let mut regions = Vec::new();
    let mut prev_hi: Scalar = 0.0;
    for k in 0..ladder.len() - 1 {
        let inner = ladder[k].radii;
        let outer = ladder[k + 1].radii;
        // Consecutive annuli may overlap in product norm when the inner box
        // is anisotropic; clamping to the previous top keeps the reported
        // intervals ordered and disjoint.
        let lo = prev_hi.max(inner.rho1.min(inner.rho2));
        let hi = outer.rho1.max(outer.rho2);
        localization.push(NormInterval { lo, hi });
        prev_hi = hi;
        let set = |par: u8, radii: RadiusBox| SetSpec {
            kind: if par == 1 { SetKind::K } else { SetKind::V },
            rho1: radii.rho1,
            rho2: radii.rho2,
        };
        regions.push(RegionRecord {
            inner: set(parities[k], inner),
            outer: set(parities[k + 1], outer),
        });
    }

    (
        Conclusion::Solutions {
            pattern,
            count: ladder.len() - 1,
        },
        localization,
        regions,
    )
}

/// Certifies a ladder of tagged radius boxes.
///
/// The rung tags must alternate between zero-index conditions (`I0`,
/// `I0star`) and the one-index condition `I1`, with `I0star` allowed only on
/// the first rung. Consecutive radii must grow by the plain or scaled gap
/// rule depending on direction. Every claimed condition must hold decisively.
/// When all of that checks out the certificate concludes `count = rungs - 1`
/// solutions with one norm interval and annulus each; otherwise it is
/// inconclusive with every detected problem in the reason.
pub fn certify(
    spec: &ProblemSpec,
    ladder: &[LadderRung],
    resolution: usize,
) -> Result<Certificate, CertificateError> {
    let constants = compute_constants(spec)?;
    let mut rungs = Vec::with_capacity(ladder.len());
    for rung in ladder {
        rungs.push(RungReport {
            tag: rung.tag,
            conditions: check_index_conditions(spec, &constants, rung.radii, resolution)?,
        });
    }
    let (conclusion, localization, regions) = conclude(&constants, ladder, &rungs);
    Ok(Certificate {
        constants,
        margin_floor: MARGIN_FLOOR,
        resolution,
        rungs,
        conclusion,
        localization,
        regions,
    })
}

/// Sampled check of one nonexistence inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSample {
    pub pass: bool,
    /// Worst relative margin over the sample lattice (positive means the
    /// inequality held everywhere).
    pub worst_margin: Scalar,
    /// Sample point `(t, u, v)` attaining the worst margin.
    pub at: (Scalar, Scalar, Scalar),
    pub error: Option<String>,
}

/// Outcome of sampled nonexistence checks.
///
/// Case 1: both nonlinearities stay strictly below `phi_{p_i}(m_i w_i)` on
/// the full domain. Case 2: both stay strictly above
/// `phi_{p_i}((M_i / c_i) w_i)` on their windows. Case 3: one component
/// satisfies the first bound and the other the second. A passing case rules
/// out nonzero solutions if the sampled inequality holds everywhere; a
/// failing sample never concludes anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub cap: Scalar,
    pub resolution: usize,
    pub verdict: String,
    pub case: Option<u8>,
    /// Per-component samples of `f_i < phi_{p_i}(m_i w_i)` on `[0, 1]`.
    pub below: [ConditionSample; 2],
    /// Per-component samples of `f_i > phi_{p_i}((M_i / c_i) w_i)` on the window.
    pub above: [ConditionSample; 2],
}

/// Log-spaced points over eight decades ending exactly at `cap`.
fn log_points(cap: Scalar, n: usize) -> Vec<Scalar> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                cap
            } else {
                cap * Scalar::powf(10.0, -8.0 * (1.0 - k as Scalar / (n - 1) as Scalar))
            }
        })
        .collect()
}

fn sample_condition(
    spec: &ProblemSpec,
    constants: &ConeConstants,
    which: usize,
    above: bool,
    cap: Scalar,
    resolution: usize,
) -> ConditionSample {
    let p = if which == 1 { spec.p1 } else { spec.p2 };
    let lap = PLaplacian::new(p).expect("well-formed exponent");
    let coeff = if above {
        if which == 1 {
            constants.M1 / constants.c1
        } else {
            constants.M2 / constants.c2
        }
    } else if which == 1 {
        constants.m1
    } else {
        constants.m2
    };
    let t_axis = if above {
        if which == 1 {
            (0.0, spec.b1)
        } else {
            (spec.a2, spec.b2)
        }
    } else {
        (0.0, 1.0)
    };
    let formula = if which == 1 { "f1" } else { "f2" };

    // The component's own variable must stay positive; the other one may be
    // zero, so its grid gains an explicit zero point.
    let own = log_points(cap, resolution);
    let mut other = vec![0.0];
    other.extend(log_points(cap, resolution));

    let mut worst: Option<(Scalar, (Scalar, Scalar, Scalar))> = None;
    for it in 0..resolution {
        let t = lattice_node(t_axis, it, resolution);
        for &w in &own {
            for &o in &other {
                let (u, v) = if which == 1 { (w, o) } else { (o, w) };
                let f = match spec.nonlinearity(which, t, u, v) {
                    Ok(f) => f,
                    Err(source) => {
                        let err = CertificateError::Eval {
                            formula,
                            t,
                            u,
                            v,
                            source,
                        };
                        return ConditionSample {
                            pass: false,
                            worst_margin: 0.0,
                            at: (t, u, v),
                            error: Some(err.to_string()),
                        };
                    }
                };
                let threshold = lap.phi(coeff * w);
                let gap = if above { f - threshold } else { threshold - f };
                let margin = gap / f.abs().max(threshold.abs()).max(Scalar::MIN_POSITIVE);
                if worst.map_or(true, |(m, _)| margin < m) {
                    worst = Some((margin, (t, u, v)));
                }
            }
        }
    }
    let (worst_margin, at) = worst.expect("sample lattice is nonempty");
    ConditionSample {
        pass: worst_margin > MARGIN_FLOOR,
        worst_margin,
        at,
        error: None,
    }
}

/// Samples the nonexistence inequalities on lattices up to amplitude `cap`.
///
/// The own variable of each component ranges over eight log decades ending at
/// `cap`; the other variable additionally takes the value zero. This check
/// can only ever rule solutions out, never certify existence.
pub fn check_nonexistence(
    spec: &ProblemSpec,
    constants: &ConeConstants,
    cap: Scalar,
    resolution: usize,
) -> NonexistenceReport {
    assert!(cap > 0.0 && cap.is_finite(), "sampling cap must be positive and finite");
    assert!(resolution >= 2, "sampling needs at least two points per axis");

    let below = [
        sample_condition(spec, constants, 1, false, cap, resolution),
        sample_condition(spec, constants, 2, false, cap, resolution),
    ];
    let above = [
        sample_condition(spec, constants, 1, true, cap, resolution),
        sample_condition(spec, constants, 2, true, cap, resolution),
    ];

    let case = if below[0].pass && below[1].pass {
        Some(1)
    } else if above[0].pass && above[1].pass {
        Some(2)
    } else if (below[0].pass && above[1].pass) || (below[1].pass && above[0].pass) {
        Some(3)
    } else {
        None
    };
    let verdict = match case {
        Some(k) => format!("sampled-nonexistence (case {k})"),
        None => "not established".to_string(),
    };

    NonexistenceReport {
        cap,
        resolution,
        verdict,
        case,
        below,
        above,
    }
}

/// Norms, window minima and set memberships of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMembership {
    pub sup_u: Scalar,
    pub sup_v: Scalar,
    pub window_min_u: Scalar,
    pub window_min_v: Scalar,
    /// In the open norm box `K_{c1 rho1, c2 rho2}`.
    pub in_inner_box: bool,
    /// In the open window set `V_{rho1, rho2}`.
    pub in_v: bool,
    /// In the open norm box `K_{rho1, rho2}`.
    pub in_outer_box: bool,
    /// Some window minimum sits exactly on its `c_i rho_i` level while none
    /// exceeds it. Exact equality is intentional: boundary witnesses are
    /// constructed states, not computed ones.
    pub on_v_boundary: bool,
    /// The inclusions `inner box -> V -> outer box` hold for this state.
    pub chain_holds: bool,
}

/// Set-inclusion diagnostics for a batch of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub members: Vec<SetMembership>,
    pub all_hold: bool,
}

/// Classifies states against the nested localization sets
/// `K_{c1 rho1, c2 rho2}`, `V_{rho1, rho2}` and `K_{rho1, rho2}`.
///
/// The chain of inclusions is a cone fact: it relies on the window inequality
/// `window min >= c_i * sup`, so it is only meaningful for states in the
/// cone. Membership in `V` requires both window minima strictly below their
/// `c_i rho_i` levels.
pub fn set_inclusion_check(
    spec: &ProblemSpec,
    constants: &ConeConstants,
    bx: RadiusBox,
    samples: &[StatePair],
) -> InclusionReport {
    let lim1 = constants.c1 * bx.rho1;
    let lim2 = constants.c2 * bx.rho2;
    let members: Vec<SetMembership> = samples
        .iter()
        .map(|state| {
            let sup_u = state.u().max_abs();
            let sup_v = state.v().max_abs();
            let window_min_u = state.u().min_on(0.0, spec.b1);
            let window_min_v = state.v().min_on(spec.a2, spec.b2);
            let in_inner_box = sup_u < lim1 && sup_v < lim2;
            let in_v = window_min_u < lim1 && window_min_v < lim2;
            let in_outer_box = sup_u < bx.rho1 && sup_v < bx.rho2;
            let on_v_boundary = (window_min_u == lim1 || window_min_v == lim2)
                && window_min_u <= lim1
                && window_min_v <= lim2;
            let chain_holds = (!in_inner_box || in_v) && (!in_v || in_outer_box);
            SetMembership {
                sup_u,
                sup_v,
                window_min_u,
                window_min_v,
                in_inner_box,
                in_v,
                in_outer_box,
                on_v_boundary,
                chain_holds,
            }
        })
        .collect();
    let all_hold = members.iter().all(|m| m.chain_holds);
    InclusionReport { members, all_hold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{example_config, Formula};
    use crate::Grid;

    fn formula(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    /// p1 = p2 = 2, unit weights, zero boundary maps and flux coefficients,
    /// windows b1 = 2/3, [a2, b2] = [1/4, 3/4]. Closed forms: m1 = 2, m2 = 8,
    /// M1 = 9/2, M2 = 32, c1 = 1/3, c2 = 1/4, nu_star = 1/2.
    fn base_spec(f1: &str, f2: &str) -> ProblemSpec {
        ProblemSpec {
            p1: 2.0,
            p2: 2.0,
            g1: formula("1"),
            g2: formula("1"),
            f1: formula(f1),
            f2: formula(f2),
            bc1: formula("0"),
            bc2: formula("0"),
            b1: 2.0 / 3.0,
            a2: 0.25,
            b2: 0.75,
            h11: 0.0,
            h12: 0.0,
            h21: 0.0,
            h22: 0.0,
        }
    }

    fn close(a: Scalar, b: Scalar, tol: Scalar) -> bool {
        (a - b).abs() <= tol
    }

    fn rung(rho1: Scalar, rho2: Scalar, tag: ConditionTag) -> LadderRung {
        LadderRung {
            radii: RadiusBox::new(rho1, rho2),
            tag,
        }
    }

    #[test]
    fn example_constants_match_closed_forms() {
        let spec = example_config().problem;
        let k = compute_constants(&spec).unwrap();
        assert!(close(k.c1, 1.0 / 3.0, 1e-12));
        assert!(close(k.c2, 0.25, 1e-12));
        // published decimals
        assert!(close(k.m1, 1.2, 1e-3));
        assert!(close(k.m2, 2.1213, 1e-3));
        assert!(close(k.M1, 5.7857, 1e-3));
        assert!(close(k.M2, 9.14497, 1e-3));
        // closed forms, tighter
        assert!(close(k.m1, 6.0 / 5.0, 1e-9));
        assert!(close(k.m2, 3.0 / Scalar::sqrt(2.0), 1e-9));
        assert!(close(k.M1, 81.0 / 14.0, 1e-8));
        let x = (7.0 + Scalar::sqrt(41.0)) / 72.0;
        let peak = (2.0 / 3.0) * (x.powf(1.5) + (0.5 - x).powf(1.5)) + x.sqrt() / 9.0;
        assert!(close(k.M2, 2.0 / peak, 1e-7));
        assert!(close(k.nu_star, (25.0 + Scalar::sqrt(41.0)) / 72.0, 1e-6));
        assert!(close(k.Mt1, 81.0 / 8.0, 1e-8));
        assert!(close(k.Mt2, 12.0, 1e-7));
        // dropping the flux terms can only enlarge the lower-bound constants
        assert!(k.Mt1 > k.M1 && k.Mt2 > k.M2);
    }

    #[test]
    fn unit_weight_quadratic_closed_forms() {
        let spec = base_spec("1", "1");
        let k = compute_constants(&spec).unwrap();
        assert!(close(k.m1, 2.0, 1e-9));
        assert!(close(k.m2, 8.0, 1e-9));
        assert!(close(k.M1, 4.5, 1e-9));
        assert!(close(k.M2, 32.0, 1e-7));
        assert!(close(k.nu_star, 0.5, 1e-5));
        // zero flux coefficients collapse the tilde constants exactly
        assert_eq!(k.M1, k.Mt1);
        assert_eq!(k.M2, k.Mt2);
    }

    #[test]
    fn ramp_weight_constants_match_hand_integrals() {
        let mut spec = base_spec("1", "1");
        spec.g1 = formula("2*t");
        spec.g2 = formula("2*t");
        spec.b1 = 0.5;
        spec.h11 = 0.125;
        spec.h12 = 0.25;
        let k = compute_constants(&spec).unwrap();
        assert!(close(k.c1, 0.5, 1e-12));
        assert!(close(k.m1, 12.0 / 7.0, 1e-9));
        assert!(close(k.M1, 96.0 / 7.0, 1e-8));
        assert!(close(k.Mt1, 24.0, 1e-8));
        // right branch dominates while the left flux term is off
        assert!(close(k.m2, 6.0, 1e-9));
        assert!(close(k.M2, 32.0, 1e-7));
        assert!(close(k.nu_star, 0.5, 1e-5));

        // a unit flux coefficient pushes the left branch past the right one
        spec.h22 = 1.0;
        let k = compute_constants(&spec).unwrap();
        assert!(close(k.m2, 3.0, 1e-9));
    }

    #[test]
    fn integrable_endpoint_singularity_needs_no_flags() {
        let mut spec = base_spec("1", "1");
        spec.g1 = formula("1/sqrt(t)");
        let k = compute_constants(&spec).unwrap();
        assert!(close(k.m1, 0.75, 1e-8));
    }

    #[test]
    fn interior_weight_failure_reports_location() {
        let mut spec = base_spec("1", "1");
        spec.g1 = formula("1/(t - 0.5)");
        match compute_constants(&spec) {
            Err(CertificateError::Weight { formula, t, .. }) => {
                assert_eq!(formula, "g1");
                assert_eq!(t, 0.5);
            }
            other => panic!("expected a weight failure, got {other:?}"),
        }
    }

    #[test]
    fn vanishing_weight_is_rejected() {
        let mut spec = base_spec("1", "1");
        spec.g1 = formula("0");
        match compute_constants(&spec) {
            Err(CertificateError::Degenerate { name, .. }) => assert_eq!(name, "m1"),
            other => panic!("expected a degenerate constant, got {other:?}"),
        }
    }

    #[test]
    fn example_growth_bounds_hit_lattice_corners() {
        let spec = example_config().problem;
        let k = compute_constants(&spec).unwrap();
        let res = 64;

        let e = growth_bound(&spec, GrowthKind::SupI1F1, RadiusBox::new(1.0, 2.0 / 3.0), res)
            .unwrap();
        assert!(close(e.extremum, 35.0 / 432.0 + 0.54, 1e-9));
        assert_eq!(e.witness, (1.0, 1.0, 2.0 / 3.0));
        assert!(close(e.value, e.extremum, 1e-12)); // rho1 = 1 leaves it unscaled

        let e = growth_bound(&spec, GrowthKind::SupI1F2, RadiusBox::new(1.0, 2.0 / 3.0), res)
            .unwrap();
        assert!(close(e.extremum, 1.0 + 5120.0 / 19683.0, 1e-9));
        assert_eq!(e.witness, (1.0, 1.0, 2.0 / 3.0));
        let scale = (2.0_f64 / 3.0).powf(2.0);
        assert!(close(e.value, e.extremum / scale, 1e-12));

        let e = growth_bound(&spec, GrowthKind::InfI0F1, RadiusBox::new(9.0, 9.0), res).unwrap();
        let lo = k.c1 * 9.0;
        assert!(close(e.extremum, lo.powi(4) / 16.0 + 0.54, 1e-9));
        assert_eq!(e.witness, (0.0, lo, 0.0));
        assert!(close(e.value, e.extremum / 3.0, 1e-12)); // 9^(p1-1) = 3

        let e = growth_bound(&spec, GrowthKind::InfI0F2, RadiusBox::new(9.0, 9.0), res).unwrap();
        assert!(close(e.extremum, 10.0 * 2.25_f64.powi(9), 1e-6));
        assert_eq!(e.witness, (0.25, 0.0, 2.25));

        let e = growth_bound(&spec, GrowthKind::InfI0starF1, RadiusBox::new(0.05, 0.05), res)
            .unwrap();
        assert!(close(e.extremum, 0.54, 1e-12));
        assert_eq!(e.witness, (0.0, 0.0, 0.0));
        assert!(close(e.value, 0.54 / 0.05_f64.sqrt(), 1e-9));

        let e = growth_bound(&spec, GrowthKind::InfI0starF2, RadiusBox::new(0.05, 0.05), res)
            .unwrap();
        assert_eq!(e.extremum, 0.0);
        assert_eq!(e.witness, (0.25, 0.0, 0.0));
    }

    #[test]
    fn growth_bounds_are_monotone_in_the_box() {
        let spec = base_spec("u^2 + v", "10/(1 + u + v)");
        let boxes = [
            RadiusBox::new(1.0, 1.0),
            RadiusBox::new(2.0, 2.0),
            RadiusBox::new(4.0, 4.0),
        ];
        let mut sup_prev = -1.0;
        let mut inf_prev = Scalar::INFINITY;
        for bx in boxes {
            let sup = growth_bound(&spec, GrowthKind::SupI1F1, bx, 9).unwrap().extremum;
            assert!(sup > sup_prev);
            sup_prev = sup;
            let inf = growth_bound(&spec, GrowthKind::InfI0starF2, bx, 9)
                .unwrap()
                .extremum;
            assert!(inf < inf_prev);
            inf_prev = inf;
        }
        assert!(close(sup_prev, 20.0, 1e-12));
        assert!(close(inf_prev, 10.0 / 9.0, 1e-12));
    }

    #[test]
    fn finer_lattices_never_weaken_bounds() {
        // Two triangular peaks at dyadic points: the narrow tall one at
        // u = 17/32 is invisible until the lattice (or a refinement
        // sub-lattice) lands on it, the wide one at u = 1/16 is recovered by
        // refinement from every lattice. All values are exact in binary.
        let two_peaks = "max(1 - 8*abs(u - 0.0625), 2 - 64*abs(u - 0.53125))";
        let spec = base_spec(two_peaks, "1");
        let bx = RadiusBox::new(1.0, 1.0);
        let sups: Vec<Scalar> = [5usize, 9, 17, 33]
            .iter()
            .map(|&n| growth_bound(&spec, GrowthKind::SupI1F1, bx, n).unwrap().extremum)
            .collect();
        assert_eq!(sups, vec![1.0, 1.0, 1.0, 2.0]);
        for w in sups.windows(2) {
            assert!(w[0] <= w[1]);
        }

        let mirrored = "min(8*abs(u - 0.0625) - 1, 64*abs(u - 0.53125) - 2)";
        let spec = base_spec(mirrored, "1");
        let infs: Vec<Scalar> = [5usize, 9, 17, 33]
            .iter()
            .map(|&n| {
                growth_bound(&spec, GrowthKind::InfI0starF1, bx, n)
                    .unwrap()
                    .extremum
            })
            .collect();
        assert_eq!(infs, vec![-1.0, -1.0, -1.0, -2.0]);
    }

    #[test]
    fn refinement_finds_off_lattice_peaks() {
        let spec = base_spec("1 - 8*abs(u - 0.0625)", "1");
        let e = growth_bound(&spec, GrowthKind::SupI1F1, RadiusBox::new(1.0, 1.0), 5).unwrap();
        assert!(e.refined);
        assert_eq!(e.extremum, 1.0);
        assert_eq!(e.witness.1, 0.0625);
    }

    #[test]
    fn constant_nonlinearities_report_the_leftmost_witness() {
        let spec = base_spec("3", "3");
        let e = growth_bound(&spec, GrowthKind::SupI1F2, RadiusBox::new(2.0, 5.0), 7).unwrap();
        assert_eq!(e.extremum, 3.0);
        assert_eq!(e.witness, (0.0, 0.0, 0.0));
        assert!(!e.refined);
        let again = growth_bound(&spec, GrowthKind::SupI1F2, RadiusBox::new(2.0, 5.0), 7).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn growth_failures_carry_the_witness_location() {
        let spec = base_spec("1/u", "1");
        match growth_bound(&spec, GrowthKind::SupI1F1, RadiusBox::new(1.0, 1.0), 4) {
            Err(CertificateError::Eval { formula, t, u, v, .. }) => {
                assert_eq!(formula, "f1");
                assert_eq!((t, u, v), (0.0, 0.0, 0.0));
            }
            other => panic!("expected an eval failure, got {other:?}"),
        }
    }

    #[test]
    fn example_index_conditions_follow_the_hand_computation() {
        let spec = example_config().problem;
        let k = compute_constants(&spec).unwrap();
        let res = 24;
        let at = |r1: Scalar, r2: Scalar| {
            check_index_conditions(&spec, &k, RadiusBox::new(r1, r2), res).unwrap()
        };

        let c = at(1.0, 2.0 / 3.0);
        assert!(c.i1.holds && c.i1.decisive);
        assert!(!c.i0.holds);

        let c = at(0.05, 0.05);
        assert!(c.i0star.holds && c.i0star.decisive);
        let star1 = &c.i0star.components[0];
        assert!(star1.satisfied);
        let expected = 0.54 / 0.05_f64.sqrt() - (81.0_f64 / 14.0).sqrt();
        assert!(close(star1.margin, expected, 1e-6));

        let c = at(9.0, 9.0);
        assert!(!c.i0.holds);
        assert!(!c.i0.components[0].satisfied);
        assert!(c.i0.components[1].satisfied);
        assert!(close(c.i0.components[0].estimate.value, 1.8675, 1e-6));

        let c = at(12.0, 12.0);
        assert!(c.i0.holds && c.i0.decisive);
    }

    #[test]
    fn zero_nonlinearities_satisfy_only_the_sup_condition() {
        let spec = base_spec("0", "0");
        let k = compute_constants(&spec).unwrap();
        let c = check_index_conditions(&spec, &k, RadiusBox::new(1.0, 1.0), 4).unwrap();
        assert!(c.i1.holds && c.i1.decisive);
        assert!(!c.i0.holds);
        assert!(!c.i0star.holds);
    }

    #[test]
    fn example_ladder_with_published_radii_is_inconclusive() {
        let spec = example_config().problem;
        let ladder = [
            rung(0.05, 0.05, ConditionTag::I0star),
            rung(1.0, 2.0 / 3.0, ConditionTag::I1),
            rung(9.0, 9.0, ConditionTag::I0),
        ];
        let cert = certify(&spec, &ladder, 24).unwrap();
        match &cert.conclusion {
            Conclusion::Inconclusive { reason } => {
                assert!(reason.contains("rung 3"), "reason: {reason}");
                assert!(reason.contains("f1"), "reason: {reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
        assert!(cert.localization.is_empty());
        assert!(cert.regions.is_empty());
    }

    #[test]
    fn widened_top_rung_certifies_two_solutions() {
        let spec = example_config().problem;
        let ladder = [
            rung(0.05, 0.05, ConditionTag::I0star),
            rung(1.0, 2.0 / 3.0, ConditionTag::I1),
            rung(12.0, 12.0, ConditionTag::I0),
        ];
        let cert = certify(&spec, &ladder, 24).unwrap();
        assert_eq!(
            cert.conclusion,
            Conclusion::Solutions {
                pattern: "S3".into(),
                count: 2
            }
        );
        assert_eq!(cert.localization.len(), 2);
        assert!(close(cert.localization[0].lo, 0.05, 1e-12));
        assert!(close(cert.localization[0].hi, 1.0, 1e-12));
        // the second lower end clamps to the previous top, not min(1, 2/3)
        assert!(close(cert.localization[1].lo, 1.0, 1e-12));
        assert!(close(cert.localization[1].hi, 12.0, 1e-12));
        assert_eq!(cert.regions[0].inner.kind, SetKind::V);
        assert_eq!(cert.regions[0].outer.kind, SetKind::K);
        assert_eq!(cert.regions[1].inner.kind, SetKind::K);
        assert_eq!(cert.regions[1].outer.kind, SetKind::V);
    }

    #[test]
    fn two_rung_ladders_certify_one_solution_each_way() {
        // zero-index rung first
        let spec = base_spec("5", "33");
        let ladder = [rung(1.0, 1.0, ConditionTag::I0), rung(10.0, 10.0, ConditionTag::I1)];
        let cert = certify(&spec, &ladder, 8).unwrap();
        assert_eq!(
            cert.conclusion,
            Conclusion::Solutions {
                pattern: "S1".into(),
                count: 1
            }
        );
        assert_eq!(cert.localization, vec![NormInterval { lo: 1.0, hi: 10.0 }]);

        // one-index rung first, with the scaled gap rule
        let spec = base_spec("u^4 / 2", "v^5");
        let ladder = [rung(1.0, 1.0, ConditionTag::I1), rung(20.0, 20.0, ConditionTag::I0)];
        let cert = certify(&spec, &ladder, 8).unwrap();
        assert_eq!(
            cert.conclusion,
            Conclusion::Solutions {
                pattern: "S2".into(),
                count: 1
            }
        );
        assert_eq!(cert.localization, vec![NormInterval { lo: 1.0, hi: 20.0 }]);
    }

    #[test]
    fn staircase_ladders_reach_extended_alternation() {
        let spec = base_spec(
            "piecewise((u <= 12, 5), (u <= 600, 250), (else, 30000))",
            "piecewise((v <= 11, 33), (v <= 600, 1500), (else, 200000))",
        );
        let mut ladder = vec![
            rung(1.0, 1.0, ConditionTag::I0),
            rung(10.0, 10.0, ConditionTag::I1),
            rung(45.0, 45.0, ConditionTag::I0),
            rung(500.0, 500.0, ConditionTag::I1),
        ];
        let cert = certify(&spec, &ladder, 8).unwrap();
        assert_eq!(
            cert.conclusion,
            Conclusion::Solutions {
                pattern: "S5".into(),
                count: 3
            }
        );
        assert_eq!(
            cert.localization,
            vec![
                NormInterval { lo: 1.0, hi: 10.0 },
                NormInterval { lo: 10.0, hi: 45.0 },
                NormInterval { lo: 45.0, hi: 500.0 },
            ]
        );

        ladder.push(rung(5000.0, 5000.0, ConditionTag::I0));
        let cert = certify(&spec, &ladder, 8).unwrap();
        assert_eq!(
            cert.conclusion,
            Conclusion::Solutions {
                pattern: "extended alternation".into(),
                count: 4
            }
        );
        assert_eq!(
            cert.localization.last(),
            Some(&NormInterval {
                lo: 500.0,
                hi: 5000.0
            })
        );
    }

    #[test]
    fn scaled_gap_violations_name_the_ordering() {
        let spec = base_spec("u^4 / 2", "v^5");
        let ladder = [rung(1.0, 1.0, ConditionTag::I1), rung(2.5, 2.5, ConditionTag::I0)];
        let cert = certify(&spec, &ladder, 8).unwrap();
        match &cert.conclusion {
            Conclusion::Inconclusive { reason } => {
                assert!(reason.contains("S2"), "reason: {reason}");
                assert!(reason.contains("rho1 < c1*r1"), "reason: {reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn misplaced_star_rungs_match_no_pattern() {
        let spec = base_spec("5", "33");
        let ladder = [
            rung(1.0, 1.0, ConditionTag::I0),
            rung(10.0, 10.0, ConditionTag::I0star),
        ];
        let cert = certify(&spec, &ladder, 4).unwrap();
        match &cert.conclusion {
            Conclusion::Inconclusive { reason } => {
                assert!(reason.contains("no S-pattern matched"), "reason: {reason}");
                assert!(reason.contains("first rung"), "reason: {reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_ladders_match_no_pattern() {
        let spec = base_spec("5", "33");

        let cert = certify(&spec, &[rung(1.0, 1.0, ConditionTag::I1)], 4).unwrap();
        match &cert.conclusion {
            Conclusion::Inconclusive { reason } => {
                assert!(reason.contains("no S-pattern matched"), "reason: {reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }

        let ladder = [rung(1.0, 1.0, ConditionTag::I0), rung(10.0, 10.0, ConditionTag::I0)];
        let cert = certify(&spec, &ladder, 4).unwrap();
        match &cert.conclusion {
            Conclusion::Inconclusive { reason } => {
                assert!(reason.contains("same index role"), "reason: {reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn borderline_margins_are_not_decisive() {
        // 32.00000001 clears the I0 threshold M2 = 32 by 1e-8, which is below
        // the relative floor 1e-9 * 32.
        let spec = base_spec("5", "32.00000001");
        let k = compute_constants(&spec).unwrap();
        let c = check_index_conditions(&spec, &k, RadiusBox::new(1.0, 1.0), 4).unwrap();
        assert!(c.i0.holds);
        assert!(!c.i0.decisive);

        let ladder = [rung(1.0, 1.0, ConditionTag::I0), rung(10.0, 10.0, ConditionTag::I1)];
        let cert = certify(&spec, &ladder, 4).unwrap();
        match &cert.conclusion {
            Conclusion::Inconclusive { reason } => {
                assert!(reason.contains("margin floor"), "reason: {reason}");
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn certificates_serialize_deterministically() {
        let spec = example_config().problem;
        let ladder = [
            rung(0.05, 0.05, ConditionTag::I0star),
            rung(1.0, 2.0 / 3.0, ConditionTag::I1),
            rung(12.0, 12.0, ConditionTag::I0),
        ];
        let a = certify(&spec, &ladder, 12).unwrap();
        let b = certify(&spec, &ladder, 12).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        assert_eq!(ja, serde_json::to_string(&b).unwrap());
        let back: Certificate = serde_json::from_str(&ja).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn shrunk_nonlinearities_sample_case_one() {
        let spec = base_spec("u", "4*v");
        let k = compute_constants(&spec).unwrap();
        let report = check_nonexistence(&spec, &k, 10.0, 12);
        assert_eq!(report.case, Some(1));
        assert_eq!(report.verdict, "sampled-nonexistence (case 1)");
        assert!(report.below[0].pass && report.below[1].pass);
        // f1 = u against threshold 2u: relative margin 1/2 everywhere
        assert!(close(report.below[0].worst_margin, 0.5, 1e-9));
    }

    #[test]
    fn grown_nonlinearities_sample_case_two() {
        let spec = base_spec("27*u", "256*v");
        let k = compute_constants(&spec).unwrap();
        let report = check_nonexistence(&spec, &k, 10.0, 12);
        assert_eq!(report.case, Some(2));
        assert_eq!(report.verdict, "sampled-nonexistence (case 2)");
        assert!(report.above[0].pass && report.above[1].pass);
        assert!(!report.below[0].pass);
    }

    #[test]
    fn mixed_scalings_sample_case_three() {
        let spec = base_spec("u", "256*v");
        let k = compute_constants(&spec).unwrap();
        let report = check_nonexistence(&spec, &k, 10.0, 12);
        assert_eq!(report.case, Some(3));
        assert!(report.below[0].pass && report.above[1].pass);
        assert!(!report.below[1].pass && !report.above[0].pass);
    }

    #[test]
    fn example_nonexistence_is_not_established() {
        let spec = example_config().problem;
        let k = compute_constants(&spec).unwrap();
        let report = check_nonexistence(&spec, &k, 10.0, 12);
        assert_eq!(report.case, None);
        assert_eq!(report.verdict, "not established");
    }

    #[test]
    fn exact_threshold_scaling_is_not_established() {
        // f1 = 2u sits exactly on phi(m1 u) = 2u: strictness fails.
        let spec = base_spec("2*u", "4*v");
        let k = compute_constants(&spec).unwrap();
        let report = check_nonexistence(&spec, &k, 10.0, 12);
        assert_eq!(report.case, None);
        assert!(!report.below[0].pass);
        assert!(report.below[1].pass);
        assert!(report.below[0].worst_margin.abs() <= 1e-9);
    }

    #[test]
    fn sampling_failures_mark_the_condition_failed() {
        let spec = base_spec("sqrt(u - 5)", "1");
        let k = compute_constants(&spec).unwrap();
        let report = check_nonexistence(&spec, &k, 10.0, 8);
        assert!(!report.below[0].pass);
        assert!(report.below[0].error.is_some());
        assert_eq!(report.case, None);
    }

    #[test]
    fn canonical_cone_profiles_respect_the_set_chain() {
        let spec = base_spec("1", "1");
        let k = compute_constants(&spec).unwrap();
        let grid = Grid::new(1024);
        let states: Vec<StatePair> = [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&lam: &Scalar| {
                StatePair::from_fns(grid, move |t| lam * (1.0 - t), move |t| lam * t.min(1.0 - t))
            })
            .collect();
        let report = set_inclusion_check(&spec, &k, RadiusBox::new(1.0, 1.0), &states);
        assert!(report.all_hold);
        let tiny = &report.members[0];
        assert!(tiny.in_inner_box && tiny.in_v && tiny.in_outer_box);
        let huge = &report.members[3];
        assert!(!huge.in_outer_box && !huge.in_v && !huge.in_inner_box);
    }

    #[test]
    fn plateau_states_sit_in_every_set() {
        let spec = base_spec("1", "1");
        let k = compute_constants(&spec).unwrap();
        let state = StatePair::from_fns(Grid::new(256), |_| 0.05, |_| 0.05);
        let report = set_inclusion_check(&spec, &k, RadiusBox::new(1.0, 1.0), &[state]);
        let m = &report.members[0];
        assert!(m.in_inner_box && m.in_v && m.in_outer_box && m.chain_holds);
        assert!(!m.on_v_boundary);
    }

    #[test]
    fn constructed_boundary_witnesses_land_on_the_v_boundary() {
        let spec = base_spec("1", "1");
        let k = compute_constants(&spec).unwrap();
        let bx = RadiusBox::new(1.0, 2.0);
        // v touches its level c2 * rho2 = 0.5 exactly at the grid node 1/4
        let state = StatePair::from_fns(
            Grid::new(1024),
            |t| 0.1 * (1.0 - t),
            |t| 2.0 * t.min(1.0 - t),
        );
        let report = set_inclusion_check(&spec, &k, bx, &[state]);
        let m = &report.members[0];
        assert_eq!(m.window_min_v, k.c2 * bx.rho2);
        assert!(m.on_v_boundary);
        assert!(!m.in_v);
        assert!(m.in_outer_box);
        assert!(m.chain_holds);
        assert!(report.all_hold);
    }
}
