//! Problem model: typed problem instances, config-file ingestion, and
//! structural validation.
//!
//! A problem instance consists of two exponents `p1`, `p2`, two weights
//! `g1(t)`, `g2(t)`, two nonlinearities `f1(t,u,v)`, `f2(t,u,v)`, two
//! boundary maps `B1(w)`, `B2(w)`, the cone windows `[0,b1]` and `[a2,b2]`,
//! and the sandwich constants `h11 <= h12`, `h21 <= h22` bounding the
//! boundary maps. Four structural conditions are validated:
//!
//! * C1: `f1`, `f2` nonnegative (sampled on a lattice),
//! * C2: the `g1` layer integral is finite and positive (quadrature),
//! * C3: the split `g2` layer integral is finite and positive (quadrature),
//! * C4: `h_i1 * w <= B_i(w) <= h_i2 * w` for `w > 0` (sampled, log-spaced).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{self, Bindings, Expr, Var};
use crate::numerics::{integrate_full, integrate_full_rel, phi_p_inv, QuadEstimate};
use crate::Scalar;

/// An expression kept together with its source text.
///
/// Serializes as the source string, so reports echo exactly what the user
/// wrote and re-parse to the identical tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    source: String,
    ast: Expr,
}

impl Formula {
    pub fn parse(source: &str) -> Result<Formula, expr::ParseError> {
        let ast = expr::parse(source)?;
        Ok(Formula {
            source: source.to_string(),
            ast,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn eval(&self, env: &Bindings<Scalar>) -> Result<Scalar, expr::EvalError> {
        self.ast.eval(env)
    }

    /// True when the expression references only variables from `allowed`.
    pub fn uses_only(&self, allowed: &[Var]) -> bool {
        self.ast.free_vars().iter().all(|v| allowed.contains(v))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        Formula::parse(&source).map_err(serde::de::Error::custom)
    }
}

/// A full problem instance.
///
/// Construct directly and call [`ProblemSpec::check_well_formed`], or go
/// through [`parse_config`] which does so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub p1: Scalar,
    pub p2: Scalar,
    pub g1: Formula,
    pub g2: Formula,
    pub f1: Formula,
    pub f2: Formula,
    #[serde(rename = "B1")]
    pub bc1: Formula,
    #[serde(rename = "B2")]
    pub bc2: Formula,
    /// First cone window is `[0, b1]`.
    pub b1: Scalar,
    /// Second cone window is `[a2, b2]`.
    pub a2: Scalar,
    pub b2: Scalar,
    pub h11: Scalar,
    pub h12: Scalar,
    pub h21: Scalar,
    pub h22: Scalar,
}

impl ProblemSpec {
    /// Structural invariants: exponent range, window ordering, sandwich
    /// constant ordering, and variable scope of each expression.
    pub fn check_well_formed(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !p.is_finite() || p <= 1.0 {
                return bad(format!("{name} must be a finite real > 1, got {p}"));
            }
        }
        if !(self.b1 > 0.0 && self.b1 < 1.0) {
            return bad(format!("b1 must lie in (0,1), got {}", self.b1));
        }
        if !(self.a2 > 0.0 && self.a2 < self.b2 && self.b2 < 1.0) {
            return bad(format!(
                "cone window must satisfy 0 < a2 < b2 < 1, got a2={}, b2={}",
                self.a2, self.b2
            ));
        }
        for (name, h) in [
            ("h11", self.h11),
            ("h12", self.h12),
            ("h21", self.h21),
            ("h22", self.h22),
        ] {
            if !h.is_finite() || h < 0.0 {
                return bad(format!("{name} must be a finite real >= 0, got {h}"));
            }
        }
        if self.h11 > self.h12 {
            return bad(format!(
                "sandwich constants must satisfy h11 <= h12, got {} > {}",
                self.h11, self.h12
            ));
        }
        if self.h21 > self.h22 {
            return bad(format!(
                "sandwich constants must satisfy h21 <= h22, got {} > {}",
                self.h21, self.h22
            ));
        }
        let scopes: [(&str, &Formula, &[Var]); 6] = [
            ("g1", &self.g1, &[Var::T]),
            ("g2", &self.g2, &[Var::T]),
            ("f1", &self.f1, &[Var::T, Var::U, Var::V]),
            ("f2", &self.f2, &[Var::T, Var::U, Var::V]),
            ("B1", &self.bc1, &[Var::W]),
            ("B2", &self.bc2, &[Var::W]),
        ];
        for (name, formula, allowed) in scopes {
            if !formula.uses_only(allowed) {
                let names: Vec<&str> = allowed.iter().map(|v| v.name()).collect();
                return bad(format!
                    ("{name} may only reference {{{}}}, got '{}'",
                    names.join(", "),
                    formula.source()
                ));
            }
        }
        Ok(())
    }

    /// Evaluate a weight at `t`.
    pub fn weight(&self, which: usize, t: Scalar) -> Result<Scalar, expr::EvalError> {
        let g = if which == 1 { &self.g1 } else { &self.g2 };
        g.eval(&Bindings::only_t(t))
    }

    /// Evaluate a nonlinearity at `(t, u, v)`.
    pub fn nonlinearity(
        &self,
        which: usize,
        t: Scalar,
        u: Scalar,
        v: Scalar,
    ) -> Result<Scalar, expr::EvalError> {
        let f = if which == 1 { &self.f1 } else { &self.f2 };
        f.eval(&Bindings::tuv(t, u, v))
    }

    /// Evaluate a boundary map at `w`.
    pub fn boundary(&self, which: usize, w: Scalar) -> Result<Scalar, expr::EvalError> {
        let b = if which == 1 { &self.bc1 } else { &self.bc2 };
        b.eval(&Bindings::only_w(w))
    }
}

/// Numerical settings, one section of the config file. Every key is
/// optional; the defaults below apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    /// Grid intervals for operator evaluation.
    pub n: usize,
    /// Absolute tolerance for adaptive quadrature.
    pub quad_tol: Scalar,
    /// Bracket width tolerance for the turning-point root.
    pub root_tol: Scalar,
    /// Interval width tolerance for 1-D minimization.
    pub min_tol: Scalar,
    /// Scan intervals for locating the leftmost turning-point bracket.
    pub scan_points: usize,
    /// Per-axis lattice size for the nonnegativity check.
    pub validation_samples: usize,
    /// Radius R of the validation boxes `[0,R]` for `u`, `v` and `w`.
    pub validation_box: Scalar,
    /// Sample count for the boundary-map sandwich check.
    pub c4_samples: usize,
    /// Per-axis lattice size for growth bounds.
    pub growth_resolution: usize,
    /// Whether `g1` has (integrable) endpoint singularities; switches the
    /// first/last grid cells to adaptive quadrature.
    pub g1_singular: bool,
    /// Same for `g2`.
    pub g2_singular: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            n: 1024,
            quad_tol: 1e-10,
            root_tol: 1e-10,
            min_tol: 1e-8,
            scan_points: 512,
            validation_samples: 64,
            validation_box: 10.0,
            c4_samples: 10_000,
            growth_resolution: 64,
            g1_singular: false,
            g2_singular: false,
        }
    }
}

/// Parsed config file: the problem plus numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub problem: ProblemSpec,
    pub numerics: NumericsConfig,
}

/// Errors from config ingestion.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Toml(String),
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("key {key} must be {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("key {key}: {err}")]
    BadExpression { key: String, err: expr::ParseError },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// Parse a config document.
///
/// Sections `[problem]`, `[cone]` and `[robin]` are required with exactly
/// the documented keys; `[numerics]` is optional and sparse. Unknown
/// sections or keys are errors.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Toml(e.message().to_string()))?;

    let mut problem = take_section(&mut root, "problem")?;
    let mut cone = take_section(&mut root, "cone")?;
    let mut robin = take_section(&mut root, "robin")?;
    let numerics_section = root.remove("numerics");

    if let Some(stray) = root.keys().next() {
        return Err(ConfigError::UnknownKey(stray.clone()));
    }

    let spec = ProblemSpec {
        p1: take_real(&mut problem, "problem", "p1")?,
        p2: take_real(&mut problem, "problem", "p2")?,
        g1: take_formula(&mut problem, "problem", "g1")?,
        g2: take_formula(&mut problem, "problem", "g2")?,
        f1: take_formula(&mut problem, "problem", "f1")?,
        f2: take_formula(&mut problem, "problem", "f2")?,
        bc1: take_formula(&mut problem, "problem", "B1")?,
        bc2: take_formula(&mut problem, "problem", "B2")?,
        b1: take_real(&mut cone, "cone", "b1")?,
        a2: take_real(&mut cone, "cone", "a2")?,
        b2: take_real(&mut cone, "cone", "b2")?,
        h11: take_real(&mut robin, "robin", "h11")?,
        h12: take_real(&mut robin, "robin", "h12")?,
        h21: take_real(&mut robin, "robin", "h21")?,
        h22: take_real(&mut robin, "robin", "h22")?,
    };
    reject_leftovers(&problem, "problem")?;
    reject_leftovers(&cone, "cone")?;
    reject_leftovers(&robin, "robin")?;

    let mut numerics = NumericsConfig::default();
    if let Some(value) = numerics_section {
        let mut table = match value {
            toml::Value::Table(t) => t,
            _ => {
                return Err(ConfigError::WrongType {
                    key: "numerics".into(),
                    expected: "a table",
                })
            }
        };
        if let Some(x) = take_opt_usize(&mut table, "numerics", "n")? {
            numerics.n = x;
        }
        if let Some(x) = take_opt_real(&mut table, "numerics", "quad_tol")? {
            numerics.quad_tol = x;
        }
        if let Some(x) = take_opt_real(&mut table, "numerics", "root_tol")? {
            numerics.root_tol = x;
        }
        if let Some(x) = take_opt_real(&mut table, "numerics", "min_tol")? {
            numerics.min_tol = x;
        }
        if let Some(x) = take_opt_usize(&mut table, "numerics", "scan_points")? {
            numerics.scan_points = x;
        }
        if let Some(x) = take_opt_usize(&mut table, "numerics", "validation_samples")? {
            numerics.validation_samples = x;
        }
        if let Some(x) = take_opt_real(&mut table, "numerics", "validation_box")? {
            numerics.validation_box = x;
        }
        if let Some(x) = take_opt_usize(&mut table, "numerics", "c4_samples")? {
            numerics.c4_samples = x;
        }
        if let Some(x) = take_opt_usize(&mut table, "numerics", "growth_resolution")? {
            numerics.growth_resolution = x;
        }
        if let Some(x) = take_opt_bool(&mut table, "numerics", "g1_singular")? {
            numerics.g1_singular = x;
        }
        if let Some(x) = take_opt_bool(&mut table, "numerics", "g2_singular")? {
            numerics.g2_singular = x;
        }
        reject_leftovers(&table, "numerics")?;
    }

    spec.check_well_formed()?;
    check_numerics(&numerics)?;
    Ok(Config {
        problem: spec,
        numerics,
    })
}

fn check_numerics(n: &NumericsConfig) -> Result<(), ConfigError> {
    let bad = |msg: String| Err(ConfigError::Invalid(msg));
    if n.n < 2 {
        return bad(format!("numerics.n must be >= 2, got {}", n.n));
    }
    for (name, tol) in [
        ("quad_tol", n.quad_tol),
        ("root_tol", n.root_tol),
        ("min_tol", n.min_tol),
    ] {
        if !(tol.is_finite() && tol > 0.0) {
            return bad(format!("numerics.{name} must be positive, got {tol}"));
        }
    }
    if n.scan_points < 2 {
        return bad(format!(
            "numerics.scan_points must be >= 2, got {}",
            n.scan_points
        ));
    }
    if n.validation_samples < 2 || n.growth_resolution < 2 || n.c4_samples < 2 {
        return bad("sample counts must be >= 2".into());
    }
    if !(n.validation_box.is_finite() && n.validation_box > 0.0) {
        return bad(format!(
            "numerics.validation_box must be positive, got {}",
            n.validation_box
        ));
    }
    Ok(())
}

fn take_section(root: &mut toml::Table, name: &str) -> Result<toml::Table, ConfigError> {
    match root.remove(name) {
        Some(toml::Value::Table(t)) => Ok(t),
        Some(_) => Err(ConfigError::WrongType {
            key: name.into(),
            expected: "a table",
        }),
        None => Err(ConfigError::MissingKey(name.into())),
    }
}

fn value_as_real(value: toml::Value, key: String) -> Result<Scalar, ConfigError> {
    match value {
        toml::Value::Float(x) => Ok(x),
        toml::Value::Integer(i) => Ok(i as Scalar),
        _ => Err(ConfigError::WrongType {
            key,
            expected: "a number",
        }),
    }
}

fn take_real(table: &mut toml::Table, section: &str, key: &str) -> Result<Scalar, ConfigError> {
    let path = format!("{section}.{key}");
    match table.remove(key) {
        Some(v) => value_as_real(v, path),
        None => Err(ConfigError::MissingKey(path)),
    }
}

fn take_opt_real(
    table: &mut toml::Table,
    section: &str,
    key: &str,
) -> Result<Option<Scalar>, ConfigError> {
    match table.remove(key) {
        Some(v) => value_as_real(v, format!("{section}.{key}")).map(Some),
        None => Ok(None),
    }
}

fn take_opt_usize(
    table: &mut toml::Table,
    section: &str,
    key: &str,
) -> Result<Option<usize>, ConfigError> {
    match table.remove(key) {
        Some(toml::Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
        Some(_) => Err(ConfigError::WrongType {
            key: format!("{section}.{key}"),
            expected: "a nonnegative integer",
        }),
        None => Ok(None),
    }
}

fn take_opt_bool(
    table: &mut toml::Table,
    section: &str,
    key: &str,
) -> Result<Option<bool>, ConfigError> {
    match table.remove(key) {
        Some(toml::Value::Boolean(b)) => Ok(Some(b)),
        Some(_) => Err(ConfigError::WrongType {
            key: format!("{section}.{key}"),
            expected: "a boolean",
        }),
        None => Ok(None),
    }
}

fn take_formula(table: &mut toml::Table, section: &str, key: &str) -> Result<Formula, ConfigError> {
    let path = format!("{section}.{key}");
    match table.remove(key) {
        Some(toml::Value::String(s)) => Formula::parse(&s).map_err(|err| {
            ConfigError::BadExpression {
                key: path,
                err,
            }
        }),
        Some(_) => Err(ConfigError::WrongType {
            key: path,
            expected: "an expression string",
        }),
        None => Err(ConfigError::MissingKey(path)),
    }
}

fn reject_leftovers(table: &toml::Table, section: &str) -> Result<(), ConfigError> {
    if let Some(stray) = table.keys().next() {
        return Err(ConfigError::UnknownKey(format!("{section}.{stray}")));
    }
    Ok(())
}

/// The built-in example configuration shipped with the tool (used by the
/// `--paper-example` CLI flag).
pub const EXAMPLE_CONFIG: &str = r#"
[problem]
p1 = 1.5
p2 = 3.0
g1 = "1"
g2 = "1"
f1 = "(u^4 + t^3*v^3)/16 + 27/50"
f2 = "sqrt(t*u) + 10*v^9"
B1 = "piecewise((w <= 0, w), (w <= 1, w/2), (else, w/6 + 1/3))"
B2 = "piecewise((w <= 1, w/3), (else, w/9 + 2/9))"

[cone]
b1 = 0.6666666666666666
a2 = 0.25
b2 = 0.75

[robin]
h11 = 0.16666666666666666
h12 = 0.5
h21 = 0.1111111111111111
h22 = 0.3333333333333333
"#;

/// Parse [`EXAMPLE_CONFIG`]. Infallible by construction (covered by tests).
pub fn example_config() -> Config {
    parse_config(EXAMPLE_CONFIG).expect("built-in example config must parse")
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Verdict for one structural condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    /// Established by quadrature with a converged error estimate.
    Pass,
    /// No violation found at the sampling resolution.
    SampledPass,
    Fail { witness: Witness, detail: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        !matches!(self, Verdict::Fail { .. })
    }
}

/// Concrete location of a validation failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    Point { t: Scalar, u: Scalar, v: Scalar },
    Boundary { w: Scalar },
    Quadrature { estimate: Scalar },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Stable identifier, `C1` through `C4`.
    pub id: String,
    /// Human-readable statement of the condition.
    pub label: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionReport>,
    /// Per-axis lattice size used for the sampled conditions.
    pub samples: usize,
    /// Radius of the `u`, `v`, `w` sampling boxes.
    pub box_radius: Scalar,
    /// Informational notes (e.g. the strong-form weight diagnostic).
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict.is_pass())
    }

    pub fn condition(&self, id: &str) -> &ConditionReport {
        self.conditions
            .iter()
            .find(|c| c.id == id)
            .expect("validation report covers C1..C4")
    }
}

/// Check the four structural conditions at the configured resolution.
pub fn validate_spec(spec: &ProblemSpec, numerics: &NumericsConfig) -> ValidationReport {
    let mut notes = Vec::new();
    let c1 = check_nonnegativity(spec, numerics);
    let c2 = check_first_weight(spec, numerics);
    let c3 = check_second_weight(spec, numerics, &mut notes);
    let c4 = check_boundary_sandwich(spec, numerics);
    ValidationReport {
        conditions: vec![
            ConditionReport {
                id: "C1".into(),
                label: "nonlinearities f1, f2 are nonnegative".into(),
                verdict: c1,
            },
            ConditionReport {
                id: "C2".into(),
                label: "first-weight layer integral is finite and positive".into(),
                verdict: c2,
            },
            ConditionReport {
                id: "C3".into(),
                label: "second-weight split layer integral is finite and positive".into(),
                verdict: c3,
            },
            ConditionReport {
                id: "C4".into(),
                label: "boundary maps sandwiched between their linear bounds".into(),
                verdict: c4,
            },
        ],
        samples: numerics.validation_samples,
        box_radius: numerics.validation_box,
        notes,
    }
}

fn check_nonnegativity(spec: &ProblemSpec, numerics: &NumericsConfig) -> Verdict {
    let n = numerics.validation_samples;
    let r = numerics.validation_box;
    let axis = |k: usize, scale: Scalar| scale * k as Scalar / (n - 1) as Scalar;
    for it in 0..n {
        let t = axis(it, 1.0);
        for iu in 0..n {
            let u = axis(iu, r);
            for iv in 0..n {
                let v = axis(iv, r);
                for (name, which) in [("f1", 1usize), ("f2", 2usize)] {
                    match spec.nonlinearity(which, t, u, v) {
                        Ok(y) if y >= 0.0 => {}
                        Ok(y) => {
                            return Verdict::Fail {
                                witness: Witness::Point { t, u, v },
                                detail: format!("{name} = {y} < 0"),
                            }
                        }
                        Err(e) => {
                            return Verdict::Fail {
                                witness: Witness::Point { t, u, v },
                                detail: format!("{name} failed to evaluate: {e}"),
                            }
                        }
                    }
                }
            }
        }
    }
    Verdict::SampledPass
}

/// Shared part of C2/C3: the weight must be nonnegative where it can be
/// sampled. Endpoint samples are skipped when the weight is declared
/// endpoint-singular.
fn weight_sign_scan(
    spec: &ProblemSpec,
    which: usize,
    singular: bool,
    samples: usize,
) -> Result<(), Verdict> {
    let name = if which == 1 { "g1" } else { "g2" };
    for k in 0..samples {
        let t = k as Scalar / (samples - 1) as Scalar;
        if singular && (k == 0 || k == samples - 1) {
            continue;
        }
        match spec.weight(which, t) {
            Ok(y) if y >= 0.0 => {}
            Ok(y) => {
                return Err(Verdict::Fail {
                    witness: Witness::Point { t, u: 0.0, v: 0.0 },
                    detail: format!("{name} = {y} < 0"),
                })
            }
            Err(e) => {
                return Err(Verdict::Fail {
                    witness: Witness::Point { t, u: 0.0, v: 0.0 },
                    detail: format!(
                        "{name} failed to evaluate: {e} (declare it endpoint-singular if intended)"
                    ),
                })
            }
        }
    }
    Ok(())
}

/// Relative tolerance for the inner pass of the nested layer integrals.
/// The outer integrand only needs a handful of significant digits of the
/// inner mass; near a singular endpoint that mass can reach 1e18, where a
/// tight relative target would cost tens of thousands of cells per outer
/// sample. Divergence still registers: there the error estimate stays the
/// same order as the value itself.
const LAYER_INNER_REL: Scalar = 1e-8;

/// Absolute tolerance floor for the outer pass of the layer integrals.
/// An inverse-square-root corner at a unit endpoint carries about
/// `2 * sqrt(ulp(1)) ~ 3e-8` of mass inside the last representable cell,
/// so no `f64` quadrature can honestly certify such an integral tighter
/// than that; the floor keeps two orders of margin while staying far
/// below any layer mass that could plausibly decide positivity.
const LAYER_OUTER_ABS: Scalar = 1e-6;

/// Error-to-value ratio above which an inner layer mass is treated as
/// divergent. Two regimes meet here: a weight singular just past the
/// unit endpoint leaves argument-quantization noise of roughly
/// `ulp(1) / distance`, at most ~1e-3 for distances the guarded outer
/// pass can reach; a mass that genuinely diverges at a nonzero point
/// pins the ratio at 0.04 or above no matter the scale, because the
/// last representable cell there holds a fixed share of the accumulated
/// value (the argument lattice near a nonzero point spans only ~52
/// octaves). The cutoff sits between the two regimes.
const LAYER_INNER_ACCEPT_RATIO: Scalar = 1e-2;

/// Distance kept between the outer layer integrals and the endpoint at
/// t = 1. Closer than this, the weight can only be sampled on the f64
/// lattice of spacing `ulp(1) ~ 2.2e-16`, and inner-mass noise becomes
/// indistinguishable from divergence. The unobserved sliver is bounded
/// separately, see [`unit_guarded_outer`].
const UNIT_GUARD: Scalar = 3e-13;

/// Safety factor turning the last clean integrand sample into a bound on
/// the unobserved sliver mass: `margin * guard * F(1 - guard)` covers any
/// power-law growth up to exponent 0.95 toward the endpoint.
const SLIVER_MARGIN: Scalar = 20.0;

/// The sliver bound must stay below this fraction of the observed mass
/// for the verdict to stand; otherwise too much of the integral hides
/// beyond the resolvable region and the condition is honestly refused.
const SLIVER_FRACTION: Scalar = 1e-3;

/// Cumulative weight over `[lo, hi]` as seen through the inverse power map,
/// for use as an outer integrand sample. Divergence maps to infinity so the
/// outer pass can classify it (endpoint → integrable convention, interior →
/// failure).
fn layered_sample(
    spec: &ProblemSpec,
    which: usize,
    p: Scalar,
    lo: Scalar,
    hi: Scalar,
    tol: Scalar,
) -> Scalar {
    let weight = |t: Scalar| spec.weight(which, t).unwrap_or(Scalar::NAN);
    let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let inner = integrate_full_rel(&weight, a, b, tol, LAYER_INNER_REL);
    let acceptable = inner.converged
        || (inner.error_estimate.is_finite()
            && inner.error_estimate <= LAYER_INNER_ACCEPT_RATIO * inner.value.abs());
    if !acceptable {
        return Scalar::INFINITY;
    }
    let mass = if lo <= hi { inner.value } else { -inner.value };
    phi_p_inv(mass, p).unwrap_or(Scalar::INFINITY)
}

/// Integrates a layer integrand over `[lo, 1]` with the last
/// [`UNIT_GUARD`] of the interval excluded from quadrature and bounded
/// instead. The integrand is nondecreasing toward the endpoint whenever
/// the weight is nonnegative, so the last clean sample bounds the sliver
/// up to power-law growth; the bound is charged into the error estimate
/// and refused outright when it stops being negligible.
fn unit_guarded_outer(
    integrand: impl Fn(Scalar) -> Scalar,
    lo: Scalar,
    outer_tol: Scalar,
) -> QuadEstimate<Scalar> {
    let hi = 1.0 - UNIT_GUARD;
    let est = integrate_full(&integrand, lo, hi, outer_tol);
    let edge = integrand(hi);
    if !edge.is_finite() {
        return QuadEstimate {
            value: est.value,
            error_estimate: Scalar::INFINITY,
            converged: false,
        };
    }
    let sliver = SLIVER_MARGIN * UNIT_GUARD * edge.abs();
    let negligible = sliver <= SLIVER_FRACTION * est.value.abs().max(LAYER_OUTER_ABS);
    QuadEstimate {
        value: est.value,
        error_estimate: est.error_estimate + sliver,
        converged: est.converged && negligible,
    }
}

fn classify_layer_integral(value: Scalar, estimate: Scalar, converged: bool) -> Verdict {
    if !converged {
        return Verdict::Fail {
            witness: Witness::Quadrature { estimate },
            detail: "layer integral did not converge (weight not integrable enough)".into(),
        };
    }
    if value <= 0.0 {
        return Verdict::Fail {
            witness: Witness::Quadrature { estimate: value },
            detail: "layer integral is not positive (weight has no mass)".into(),
        };
    }
    Verdict::Pass
}

fn check_first_weight(spec: &ProblemSpec, numerics: &NumericsConfig) -> Verdict {
    if let Err(v) = weight_sign_scan(spec, 1, numerics.g1_singular, numerics.validation_samples) {
        return v;
    }
    let tol = numerics.quad_tol;
    let outer = unit_guarded_outer(
        |s: Scalar| layered_sample(spec, 1, spec.p1, 0.0, s, tol),
        0.0,
        tol.max(LAYER_OUTER_ABS),
    );
    classify_layer_integral(outer.value, outer.error_estimate, outer.converged)
}

fn check_second_weight(
    spec: &ProblemSpec,
    numerics: &NumericsConfig,
    notes: &mut Vec<String>,
) -> Verdict {
    if let Err(v) = weight_sign_scan(spec, 2, numerics.g2_singular, numerics.validation_samples) {
        return v;
    }
    let tol = numerics.quad_tol;
    let outer_tol = tol.max(LAYER_OUTER_ABS);
    let left = integrate_full(
        &|s: Scalar| layered_sample(spec, 2, spec.p2, s, 0.5, tol),
        0.0,
        0.5,
        outer_tol,
    );
    let right = unit_guarded_outer(
        |s: Scalar| layered_sample(spec, 2, spec.p2, 0.5, s, tol),
        0.5,
        outer_tol,
    );

    // Diagnostic only: the single-piece comparison integral may diverge even
    // when the split form above is finite; that is exactly what makes the
    // split form the weaker (more permissive) condition.
    let strong = unit_guarded_outer(
        |s: Scalar| layered_sample(spec, 2, spec.p2, s, 1.0, tol),
        0.0,
        outer_tol,
    );
    if strong.converged {
        notes.push(format!(
            "single-piece comparison integral for g2 also converges (value {:.6e})",
            strong.value
        ));
    } else {
        notes.push(
            "single-piece comparison integral for g2 diverges; the split-form condition \
             is strictly weaker here"
                .into(),
        );
    }

    let value = left.value + right.value;
    let estimate = left.error_estimate + right.error_estimate;
    classify_layer_integral(value, estimate, left.converged && right.converged)
}

fn check_boundary_sandwich(spec: &ProblemSpec, numerics: &NumericsConfig) -> Verdict {
    let n = numerics.c4_samples;
    let r = numerics.validation_box;
    // Log-spaced samples over (0, R], spanning eight decades below R so the
    // behavior near zero is resolved.
    let lo = r * 1e-8;
    for k in 0..n {
        let w = lo * (r / lo).powf(k as Scalar / (n - 1) as Scalar);
        for (name, which, h_lo, h_hi) in [
            ("B1", 1usize, spec.h11, spec.h12),
            ("B2", 2usize, spec.h21, spec.h22),
        ] {
            let y = match spec.boundary(which, w) {
                Ok(y) => y,
                Err(e) => {
                    return Verdict::Fail {
                        witness: Witness::Boundary { w },
                        detail: format!("{name} failed to evaluate: {e}"),
                    }
                }
            };
            let slack = 1e-12 * (1.0 + w.abs());
            if y < h_lo * w - slack {
                return Verdict::Fail {
                    witness: Witness::Boundary { w },
                    detail: format!("{name}({w}) = {y} falls below the lower bound {}", h_lo * w),
                };
            }
            if y > h_hi * w + slack {
                return Verdict::Fail {
                    witness: Witness::Boundary { w },
                    detail: format!("{name}({w}) = {y} exceeds the upper bound {}", h_hi * w),
                };
            }
        }
    }
    Verdict::SampledPass
}
