//! Machine-readable run reports and plot-ready CSV emission.
//!
//! A report is self-contained: it echoes the problem and numerics settings it
//! was produced from, so any run can be repeated from its own report. JSON
//! serialization round-trips exactly (floats are emitted with enough digits
//! to reparse bit-identically); the 9-significant-digit rule applies to the
//! human-readable renderings and CSV files, not to the JSON.

use serde::{Deserialize, Serialize};

use crate::certificates::{Certificate, ConeConstants, NonexistenceReport};
use crate::problem::{NumericsConfig, ProblemSpec, ValidationReport};
use crate::solver::{LocalizedRecord, SolutionRecord};
use crate::Scalar;

/// Version of the report layout, bumped on breaking field changes.
pub const SCHEMA_VERSION: &str = "1";

/// Crate version stamped into every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scalar digest of one solver solution. The curves themselves go to CSV;
/// the report keeps every per-solution number needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    /// Position in the sorted solver output, starting at 1; also names the
    /// per-solution CSV file.
    pub index: usize,
    pub sup_u: Scalar,
    pub sup_v: Scalar,
    pub norm: Scalar,
    pub residual: Scalar,
    pub sigma: Scalar,
    pub iterations: usize,
    pub start: (Scalar, Scalar),
    pub cone_pass: bool,
    /// Certified norm interval containing the solution, when a conclusive
    /// certificate was available to localize against.
    pub localization: Option<String>,
}

impl SolutionSummary {
    pub fn from_record(index: usize, record: &SolutionRecord) -> Self {
        Self {
            index,
            sup_u: record.norms.0,
            sup_v: record.norms.1,
            norm: record.norms.2,
            residual: record.residual,
            sigma: record.sigma,
            iterations: record.iterations,
            start: record.start_used,
            cone_pass: record.cone_report.all_pass(),
            localization: None,
        }
    }

    pub fn from_localized(index: usize, localized: &LocalizedRecord) -> Self {
        let mut summary = Self::from_record(index, &localized.record);
        summary.localization = Some(localized.label.clone());
        summary
    }
}

/// The complete result of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub tool_version: String,
    /// Subcommand that produced the report.
    pub command: String,
    /// Echo of the problem the run operated on.
    pub problem: ProblemSpec,
    /// Echo of the numerics settings, after CLI overrides.
    pub numerics: NumericsConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constants: Option<ConeConstants>,
    /// Per-box growth bounds, thresholds and margins live inside the rungs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nonexistence: Option<NonexistenceReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub solutions: Vec<SolutionSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    pub elapsed_seconds: Scalar,
}

impl RunReport {
    pub fn new(command: &str, problem: ProblemSpec, numerics: NumericsConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            problem,
            numerics,
            validation: None,
            constants: None,
            certificate: None,
            nonexistence: None,
            solutions: Vec::new(),
            warnings: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub use crate::sig9;

fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push_str("\r\n");
    line
}

/// Curve of one solution as RFC-4180 CSV with header `t,u,v`.
pub fn solution_csv(record: &SolutionRecord) -> String {
    let grid = record.state.u().grid();
    let mut out = csv_line(&["t".into(), "u".into(), "v".into()]);
    for k in 0..grid.n_nodes() {
        let t: Scalar = grid.node(k);
        out.push_str(&csv_line(&[
            sig9(t),
            sig9(record.state.u().values()[k]),
            sig9(record.state.v().values()[k]),
        ]));
    }
    out
}

/// One-row-per-solution digest as RFC-4180 CSV with header
/// `norm,residual,sigma`.
pub fn summary_csv(records: &[SolutionRecord]) -> String {
    let mut out = csv_line(&["norm".into(), "residual".into(), "sigma".into()]);
    for record in records {
        out.push_str(&csv_line(&[
            sig9(record.norms.2),
            sig9(record.residual),
            sig9(record.sigma),
        ]));
    }
    out
}
