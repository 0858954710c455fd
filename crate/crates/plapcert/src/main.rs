//! Command-line front end: config ingestion, orchestration of the
//! validate/constants/certify/solve pipelines, and report emission.
//!
//! Exit codes: 0 success, 1 input error, 2 validation fail, 3 inconclusive
//! certificate, 4 no solution found.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use plapcert::certificates::{
    certify, check_nonexistence, compute_constants, Certificate, Conclusion, ConditionResult,
    ConditionTag, ConeConstants, LadderRung, NonexistenceReport, RadiusBox, RungReport,
};
use plapcert::problem::{
    example_config, parse_config, Config, ConditionReport, ValidationReport, Verdict, Witness,
};
use plapcert::report::{sig9, solution_csv, summary_csv, RunReport, SolutionSummary};
use plapcert::solver::{localize, multi_start_solve, SolutionRecord, SolverConfig};
use plapcert::Scalar;

/// Grids below this many intervals get a report warning: the discretization
/// error may dominate the tolerances the certificates rely on.
const GRID_WARNING_FLOOR: usize = 256;

/// Product norm under which a solver fixed point counts as the zero state.
const TRIVIAL_NORM: Scalar = 1e-6;

#[derive(Parser)]
#[command(
    name = "plapcert",
    version,
    about = "Existence certificates and solvers for one-dimensional two-component p-Laplacian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions of a problem config
    Validate(CommonArgs),
    /// Compute the cone constants of a problem config
    Constants(CommonArgs),
    /// Evaluate an index-condition ladder, or sampled nonexistence without one
    Certify(CertifyArgs),
    /// Run the damped multi-start fixed-point solver
    Solve(SolveArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a TOML problem config
    config: Option<PathBuf>,
    /// Use the built-in worked example instead of a config file
    #[arg(long)]
    paper_example: bool,
    /// Override the number of grid intervals
    #[arg(long, value_name = "INT")]
    n: Option<usize>,
    /// Override the quadrature and root-finding tolerances
    #[arg(long, value_name = "REAL")]
    tol: Option<Scalar>,
    /// Write the JSON report to this path
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Print the JSON report to standard output instead of a text summary
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Ladder rungs "RHO1,RHO2:TAG" with TAG one of I1, I0, I0star;
    /// repeatable, and one value may hold several space-separated rungs
    #[arg(long = "ladder", value_name = "RUNGS")]
    ladder: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Optional ladder used to localize solutions against a certificate
    #[arg(long = "ladder", value_name = "RUNGS")]
    ladder: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Constants(args) => cmd_constants(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Solve(args) => cmd_solve(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Resolves the problem source and applies CLI overrides. All failures here
/// are input errors (exit 1).
fn load_config(args: &CommonArgs) -> Result<(Config, String), String> {
    let mut config = match (&args.config, args.paper_example) {
        (Some(_), true) => {
            return Err("give either a config path or --paper-example, not both".into())
        }
        (None, false) => {
            return Err("missing config path (or pass --paper-example)".into());
        }
        (None, true) => example_config(),
        (Some(path), false) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| e.to_string())?
        }
    };
    let label = match &args.config {
        Some(path) => path.display().to_string(),
        None => "built-in example".to_string(),
    };
    if let Some(n) = args.n {
        if n < 2 {
            return Err(format!("--n must be at least 2, got {n}"));
        }
        config.numerics.n = n;
    }
    if let Some(tol) = args.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(format!("--tol must be a positive real, got {tol}"));
        }
        config.numerics.quad_tol = tol;
        config.numerics.root_tol = tol;
    }
    config.problem.check_well_formed().map_err(|e| e.to_string())?;
    Ok((config, label))
}

fn parse_ladder(values: &[String]) -> Result<Vec<LadderRung>, String> {
    let mut rungs = Vec::new();
    for value in values {
        for token in value.split_whitespace() {
            rungs.push(parse_rung(token)?);
        }
    }
    Ok(rungs)
}

fn parse_rung(token: &str) -> Result<LadderRung, String> {
    let bad = || {
        format!("malformed ladder rung {token:?}: expected RHO1,RHO2:TAG with TAG one of I1, I0, I0star")
    };
    let (radii, tag) = token.split_once(':').ok_or_else(bad)?;
    let (r1, r2) = radii.split_once(',').ok_or_else(bad)?;
    let rho1: Scalar = r1.trim().parse().map_err(|_| bad())?;
    let rho2: Scalar = r2.trim().parse().map_err(|_| bad())?;
    if !(rho1.is_finite() && rho1 > 0.0 && rho2.is_finite() && rho2 > 0.0) {
        return Err(format!("ladder radii must be positive reals, got {token:?}"));
    }
    let tag = match tag.trim() {
        "I1" => ConditionTag::I1,
        "I0" => ConditionTag::I0,
        "I0star" => ConditionTag::I0star,
        _ => return Err(bad()),
    };
    Ok(LadderRung {
        radii: RadiusBox::new(rho1, rho2),
        tag,
    })
}

fn push_grid_warning(report: &mut RunReport) {
    let n = report.numerics.n;
    if n < GRID_WARNING_FLOOR {
        report.warnings.push(format!(
            "grid-convergence check: n = {n} is below {GRID_WARNING_FLOOR} intervals; \
             discretization error may exceed the reported tolerances"
        ));
    }
}

fn emit(report: &RunReport, args: &CommonArgs, text: &str) -> Result<(), String> {
    if let Some(path) = &args.out {
        fs::write(path, report.to_json())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{text}");
        for warning in &report.warnings {
            println!("warning: {warning}");
        }
    }
    Ok(())
}

fn cmd_validate(args: &CommonArgs) -> Result<u8, String> {
    let started = Instant::now();
    let (config, label) = load_config(args)?;
    let mut report = RunReport::new("validate", config.problem.clone(), config.numerics.clone());
    push_grid_warning(&mut report);

    let validation = plapcert::problem::validate_spec(&config.problem, &config.numerics);
    let ok = validation.all_pass();
    let text = render_validation(&label, &validation);
    report.validation = Some(validation);
    report.elapsed_seconds = started.elapsed().as_secs_f64();
    emit(&report, args, &text)?;
    Ok(if ok { 0 } else { 2 })
}

fn cmd_constants(args: &CommonArgs) -> Result<u8, String> {
    let started = Instant::now();
    let (config, label) = load_config(args)?;
    let mut report = RunReport::new("constants", config.problem.clone(), config.numerics.clone());
    push_grid_warning(&mut report);

    match compute_constants(&config.problem) {
        Ok(constants) => {
            let text = render_constants(&label, &constants);
            report.constants = Some(constants);
            report.elapsed_seconds = started.elapsed().as_secs_f64();
            emit(&report, args, &text)?;
            Ok(0)
        }
        Err(err) => {
            report
                .warnings
                .push(format!("cone constants are undefined: {err}"));
            report.elapsed_seconds = started.elapsed().as_secs_f64();
            emit(&report, args, &format!("constants: {label}\n"))?;
            eprintln!("error: {err}");
            Ok(2)
        }
    }
}

fn cmd_certify(args: &CertifyArgs) -> Result<u8, String> {
    let started = Instant::now();
    let (config, label) = load_config(&args.common)?;
    let ladder = parse_ladder(&args.ladder)?;
    let mut report = RunReport::new("certify", config.problem.clone(), config.numerics.clone());
    push_grid_warning(&mut report);

    if ladder.is_empty() {
        // no ladder: fall back to the sampled nonexistence test
        let constants = match compute_constants(&config.problem) {
            Ok(c) => c,
            Err(err) => {
                eprintln!("error: {err}");
                return Ok(2);
            }
        };
        let cap = config.numerics.validation_box.max(10.0);
        let nonexistence = check_nonexistence(
            &config.problem,
            &constants,
            cap,
            config.numerics.growth_resolution,
        );
        let established = nonexistence.case.is_some();
        let text = render_nonexistence(&label, &nonexistence);
        report.constants = Some(constants);
        report.nonexistence = Some(nonexistence);
        report.elapsed_seconds = started.elapsed().as_secs_f64();
        emit(&report, &args.common, &text)?;
        return Ok(if established { 0 } else { 3 });
    }

    match certify(&config.problem, &ladder, config.numerics.growth_resolution) {
        Ok(certificate) => {
            let conclusive = matches!(certificate.conclusion, Conclusion::Solutions { .. });
            let text = render_certificate(&label, &certificate);
            report.constants = Some(certificate.constants);
            report.certificate = Some(certificate);
            report.elapsed_seconds = started.elapsed().as_secs_f64();
            emit(&report, &args.common, &text)?;
            Ok(if conclusive { 0 } else { 3 })
        }
        Err(err) => {
            eprintln!("error: {err}");
            Ok(2)
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8, String> {
    let started = Instant::now();
    let (config, label) = load_config(&args.common)?;
    let ladder = parse_ladder(&args.ladder)?;
    let mut report = RunReport::new("solve", config.problem.clone(), config.numerics.clone());
    push_grid_warning(&mut report);

    let certificate = if ladder.is_empty() {
        None
    } else {
        match certify(&config.problem, &ladder, config.numerics.growth_resolution) {
            Ok(cert) => Some(cert),
            Err(err) => {
                eprintln!("error: {err}");
                return Ok(2);
            }
        }
    };

    let mut solver_cfg = SolverConfig::default();
    if let Some(cert) = &certificate {
        // scale the divergence ceiling to the outermost certified box
        let max_radius = cert
            .rungs
            .iter()
            .map(|r| r.conditions.rho1.max(r.conditions.rho2))
            .fold(1.0 as Scalar, Scalar::max);
        solver_cfg.divergence_norm = 1e3 * max_radius;
    }
    let records = multi_start_solve(&config.problem, &config.numerics, &solver_cfg);
    let nontrivial = records.iter().filter(|r| r.norms.2 > TRIVIAL_NORM).count();

    let localized = certificate
        .as_ref()
        .filter(|cert| matches!(cert.conclusion, Conclusion::Solutions { .. }))
        .map(|cert| localize(records.clone(), cert));
    report.solutions = match &localized {
        Some(tagged) => tagged
            .iter()
            .enumerate()
            .map(|(k, r)| SolutionSummary::from_localized(k + 1, r))
            .collect(),
        None => records
            .iter()
            .enumerate()
            .map(|(k, r)| SolutionSummary::from_record(k + 1, r))
            .collect(),
    };
    if let Some(cert) = certificate {
        if !matches!(cert.conclusion, Conclusion::Solutions { .. }) {
            report
                .warnings
                .push("ladder is inconclusive; solutions are not localized".to_string());
        }
        report.constants = Some(cert.constants);
        report.certificate = Some(cert);
    }
    if records.is_empty() {
        report
            .warnings
            .push("no fixed point converged from any start".to_string());
    } else if nontrivial == 0 {
        report.warnings.push(format!(
            "only the zero state was found (every solution norm is at most {})",
            sig9(TRIVIAL_NORM)
        ));
    }

    let written = write_solution_csvs(&records, &args.common.out)?;
    let text = render_solve(&label, &report.solutions, &written);
    report.elapsed_seconds = started.elapsed().as_secs_f64();
    emit(&report, &args.common, &text)?;
    Ok(if nontrivial > 0 { 0 } else { 4 })
}

/// Writes one curve CSV per solution plus the summary CSV. File names derive
/// from the report path when `--out` is given, otherwise land in the current
/// directory.
fn write_solution_csvs(
    records: &[SolutionRecord],
    out: &Option<PathBuf>,
) -> Result<Vec<PathBuf>, String> {
    let (dir, stem) = match out {
        Some(path) => (
            path.parent().map(PathBuf::from).unwrap_or_default(),
            path.file_stem()
                .map(|s| format!("{}_", s.to_string_lossy()))
                .unwrap_or_default(),
        ),
        None => (PathBuf::new(), String::new()),
    };
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<(), String> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        written.push(path);
        Ok(())
    };
    for (k, record) in records.iter().enumerate() {
        write(format!("{stem}solution_{}.csv", k + 1), solution_csv(record))?;
    }
    write(format!("{stem}summary.csv"), summary_csv(records))?;
    Ok(written)
}

fn render_witness(witness: &Witness) -> String {
    match witness {
        Witness::Point { t, u, v } => {
            format!("(t, u, v) = ({}, {}, {})", sig9(*t), sig9(*u), sig9(*v))
        }
        Witness::Boundary { w } => format!("w = {}", sig9(*w)),
        Witness::Quadrature { estimate } => format!("quadrature estimate {}", sig9(*estimate)),
    }
}

fn render_condition(condition: &ConditionReport) -> String {
    let verdict = match &condition.verdict {
        Verdict::Pass => "pass".to_string(),
        Verdict::SampledPass => "sampled-pass".to_string(),
        Verdict::Fail { witness, detail } => {
            format!("FAIL — {detail} at {}", render_witness(witness))
        }
    };
    format!("{} {}: {verdict}\n", condition.id, condition.label)
}

fn render_validation(label: &str, validation: &ValidationReport) -> String {
    let mut text = format!("validate: {label}\n");
    for condition in &validation.conditions {
        text.push_str(&render_condition(condition));
    }
    text.push_str(&format!(
        "sampled on a {}-point lattice per axis over boxes of radius {}\n",
        validation.samples,
        sig9(validation.box_radius)
    ));
    for note in &validation.notes {
        text.push_str(&format!("note: {note}\n"));
    }
    text.push_str(if validation.all_pass() {
        "result: pass\n"
    } else {
        "result: fail\n"
    });
    text
}

fn render_constants(label: &str, constants: &ConeConstants) -> String {
    format!(
        "constants: {label}\n\
         c1  = {}\nc2  = {}\n\
         m1  = {}\nM1  = {}\n\
         m2  = {}\nM2  = {}\n\
         Mt1 = {}\nMt2 = {}\n\
         nu* = {}\n",
        sig9(constants.c1),
        sig9(constants.c2),
        sig9(constants.m1),
        sig9(constants.M1),
        sig9(constants.m2),
        sig9(constants.M2),
        sig9(constants.Mt1),
        sig9(constants.Mt2),
        sig9(constants.nu_star),
    )
}

fn tagged_condition(rung: &RungReport) -> &ConditionResult {
    match rung.tag {
        ConditionTag::I1 => &rung.conditions.i1,
        ConditionTag::I0 => &rung.conditions.i0,
        ConditionTag::I0star => &rung.conditions.i0star,
    }
}

fn count_in_words(count: usize) -> String {
    match count {
        1 => "one".to_string(),
        2 => "two".to_string(),
        3 => "three".to_string(),
        4 => "four".to_string(),
        5 => "five".to_string(),
        6 => "six".to_string(),
        7 => "seven".to_string(),
        8 => "eight".to_string(),
        9 => "nine".to_string(),
        n => n.to_string(),
    }
}

fn render_certificate(label: &str, certificate: &Certificate) -> String {
    let mut text = format!(
        "certify: {label} (growth lattice {} per axis)\n",
        certificate.resolution
    );
    for (k, rung) in certificate.rungs.iter().enumerate() {
        let condition = tagged_condition(rung);
        let status = if condition.holds && condition.decisive {
            "holds decisively"
        } else if condition.holds {
            "holds only within the margin floor"
        } else {
            "fails"
        };
        text.push_str(&format!(
            "rung {} ({}) at ({}, {}): {status}\n",
            k + 1,
            rung.tag,
            sig9(rung.conditions.rho1),
            sig9(rung.conditions.rho2),
        ));
        for bound in &condition.components {
            let side = if bound.estimate.kind.is_sup() {
                "sup"
            } else {
                "inf"
            };
            text.push_str(&format!(
                "  f{}: {side} {} vs threshold {} (margin {})\n",
                bound.component,
                sig9(bound.estimate.value),
                sig9(bound.threshold),
                sig9(bound.margin),
            ));
        }
    }
    match &certificate.conclusion {
        Conclusion::Solutions { pattern, count } => {
            text.push_str(&format!(
                "conclusion: {} solution{} ({pattern})\n",
                count_in_words(*count),
                if *count == 1 { "" } else { "s" },
            ));
            let intervals: Vec<String> = certificate
                .localization
                .iter()
                .map(|iv| format!("({}, {}]", sig9(iv.lo), sig9(iv.hi)))
                .collect();
            text.push_str(&format!("norm intervals: {}\n", intervals.join(", ")));
        }
        Conclusion::Nonexistence { case } => {
            text.push_str(&format!("conclusion: sampled-nonexistence (case {case})\n"));
        }
        Conclusion::Inconclusive { reason } => {
            text.push_str(&format!("conclusion: inconclusive — {reason}\n"));
        }
    }
    text
}

fn render_nonexistence(label: &str, nonexistence: &NonexistenceReport) -> String {
    let mut text = format!(
        "certify: {label} — no ladder given, sampling nonexistence up to norm {} \
         at resolution {}\n",
        sig9(nonexistence.cap),
        nonexistence.resolution
    );
    for (name, pair) in [
        ("below-threshold scaling", &nonexistence.below),
        ("above-threshold scaling", &nonexistence.above),
    ] {
        for (i, sample) in pair.iter().enumerate() {
            let status = if sample.pass { "pass" } else { "fail" };
            text.push_str(&format!(
                "{name} f{}: {status}, worst margin {} at (t, u, v) = ({}, {}, {})\n",
                i + 1,
                sig9(sample.worst_margin),
                sig9(sample.at.0),
                sig9(sample.at.1),
                sig9(sample.at.2),
            ));
            if let Some(error) = &sample.error {
                text.push_str(&format!("  evaluation error: {error}\n"));
            }
        }
    }
    text.push_str(&format!("verdict: {}\n", nonexistence.verdict));
    text
}

fn render_solve(label: &str, solutions: &[SolutionSummary], written: &[PathBuf]) -> String {
    let mut text = format!("solve: {label}\n");
    if solutions.is_empty() {
        text.push_str("no fixed points converged\n");
    }
    for s in solutions {
        text.push_str(&format!(
            "#{}: norm {}, residual {}, sigma {}, iterations {}, start ({}, {}), cone {}{}\n",
            s.index,
            sig9(s.norm),
            sig9(s.residual),
            sig9(s.sigma),
            s.iterations,
            sig9(s.start.0),
            sig9(s.start.1),
            if s.cone_pass { "pass" } else { "FAIL" },
            match &s.localization {
                Some(interval) => format!(", interval {interval}"),
                None => String::new(),
            },
        ));
    }
    for path in written {
        text.push_str(&format!("wrote {}\n", path.display()));
    }
    text
}
