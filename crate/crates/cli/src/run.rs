//! The `solve`, `compare`, `converge` and `validate` experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use rfde::accuracy::{
    convergence_study, error_report, residual, sample_points, timed_solve, AccuracyError,
    ErrorNorms, Reference, ReferenceKind, StudyOptions,
};
use rfde::collocation::SolveError;
use rfde::linalg::condition_estimate;
use rfde::reference::{
    brute_force_poly_identity, format_real, identity_sides, relative_deviation,
    rk4_method_of_steps, Identity, IdentityCheck, ReferenceError,
};

use crate::config::{BuiltProblem, ConfigError, LoadedConfig, ReferenceName};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no truncation given: set {0} or pass --N / --N-list")]
    MissingTruncation(&'static str),
    #[error("{0}")]
    InvalidOverride(String),
    #[error("solve failed at N={n}: {source}")]
    Solve { n: usize, source: SolveError },
    #[error("every truncation failed; first error at N={n}: {message}")]
    AllFailed { n: usize, message: String },
    #[error("no oracle configured: set [oracle] step or pass --oracle-step")]
    MissingOracle,
    #[error("oracle failed: {0}")]
    Oracle(#[from] ReferenceError),
    #[error(transparent)]
    Accuracy(AccuracyError),
    #[error("{failed} identity checks failed")]
    IdentityFailure { failed: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// 0 success, 1 output I/O, 2 configuration, 3 solver, 4 oracle.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io { .. } => 1,
            RunError::Config(_) | RunError::MissingTruncation(_) | RunError::InvalidOverride(_) => {
                2
            }
            RunError::Solve { .. }
            | RunError::AllFailed { .. }
            | RunError::IdentityFailure { .. } => 3,
            RunError::MissingOracle | RunError::Oracle(_) => 4,
            RunError::Accuracy(AccuracyError::Reference(_)) => 4,
            RunError::Accuracy(_) => 3,
        }
    }
}

impl From<AccuracyError> for RunError {
    fn from(e: AccuracyError) -> Self {
        match e {
            AccuracyError::Reference(r) => RunError::Oracle(r),
            e => RunError::Accuracy(e),
        }
    }
}

/// Command-line settings that take precedence over the configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub oracle_step: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// One truncation of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    /// Coefficients per equation.
    pub coefficients: Vec<Vec<f64>>,
    /// Norms per equation against the reference, if there is one.
    pub norms: Vec<Option<ErrorNorms>>,
    /// Largest residual over the sample points, per equation.
    pub max_residual: Vec<f64>,
    pub cpu_time: f64,
    pub condition: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub verb: &'static str,
    pub reference: ReferenceKind,
    pub records: Vec<RunRecord>,
    /// Truncations whose solve failed, with the message.
    pub failures: Vec<(usize, String)>,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    /// Human-readable summary printed by the CLI.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = write!(
                s,
                "N={:<3} cpu_time={:.3e}s cond={:.3e} iterations={}",
                r.n, r.cpu_time, r.condition, r.iterations
            );
            for (i, norm) in r.norms.iter().enumerate() {
                if let Some(n) = norm {
                    let _ = write!(
                        s,
                        " | u_{}: l2={:.3e} linf={:.3e} rms={:.3e}",
                        i + 1,
                        n.l2,
                        n.linf,
                        n.rms
                    );
                }
            }
            s.push('\n');
        }
        for (n, msg) in &self.failures {
            let _ = writeln!(s, "N={n:<3} failed: {msg}");
        }
        for p in &self.outputs {
            let _ = writeln!(s, "wrote {}", p.display());
        }
        s
    }
}

struct Experiment<'a> {
    loaded: &'a LoadedConfig,
    built: BuiltProblem,
    study: StudyOptions,
    oracle_step: Option<f64>,
    truncations: Vec<usize>,
}

impl<'a> Experiment<'a> {
    fn new(loaded: &'a LoadedConfig, o: &Overrides) -> Result<Self, RunError> {
        let built = loaded.build()?;
        let solver = &loaded.config.solver;
        let mut solve = loaded.solve_options();
        if let Some(tol) = o.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(RunError::InvalidOverride(format!(
                    "--tol must be positive, got {tol}"
                )));
            }
            solve.nonlinear.tol = tol;
        }
        if let Some(m) = o.max_iter {
            if m == 0 {
                return Err(RunError::InvalidOverride(
                    "--max-iter must be at least 1".into(),
                ));
            }
            solve.nonlinear.max_iter = m;
        }
        let oracle_step = o
            .oracle_step
            .or(loaded.config.oracle.as_ref().map(|c| c.step));
        if let Some(h) = oracle_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(RunError::InvalidOverride(format!(
                    "--oracle-step must be positive, got {h}"
                )));
            }
        }
        let truncations = o
            .n_list
            .clone()
            .or(o.n.map(|n| vec![n]))
            .or(solver.n_list.clone())
            .or(solver.n.map(|n| vec![n]))
            .unwrap_or_default();
        if truncations.is_empty() && (o.n_list.is_some()) {
            return Err(RunError::InvalidOverride(
                "--N-list must not be empty".into(),
            ));
        }
        Ok(Experiment {
            loaded,
            built,
            study: StudyOptions {
                solve,
                window: loaded
                    .config
                    .reference
                    .as_ref()
                    .and_then(|r| r.window)
                    .map(|[a, b]| (a, b)),
                samples_per_unit: solver.samples_per_unit,
                timing_repeats: solver.timing_repeats,
            },
            oracle_step,
            truncations,
        })
    }

    fn truncations(&self, field: &'static str) -> Result<&[usize], RunError> {
        if self.truncations.is_empty() {
            Err(RunError::MissingTruncation(field))
        } else {
            Ok(&self.truncations)
        }
    }

    fn oracle(&self) -> Result<Reference, RunError> {
        let step = self.oracle_step.ok_or(RunError::MissingOracle)?;
        let p = &self.built.problem;
        Ok(Reference::MethodOfSteps(rk4_method_of_steps(
            p,
            p.history(),
            step,
        )?))
    }

    fn reference(&self) -> Result<Reference, RunError> {
        let kind = match self.loaded.reference_kind() {
            ReferenceName::None
                if self.loaded.config.reference.is_none() && self.oracle_step.is_some() =>
            {
                ReferenceName::Oracle
            }
            k => k,
        };
        match kind {
            ReferenceName::Exact => Ok(Reference::Exact(
                self.built
                    .exact
                    .clone()
                    .expect("validated with the configuration"),
            )),
            ReferenceName::Oracle => self.oracle(),
            ReferenceName::None => Ok(Reference::None),
        }
    }

    fn points(&self) -> Result<Vec<f64>, RunError> {
        Ok(self.study.points(&self.built.problem)?)
    }

    fn full_points(&self) -> Vec<f64> {
        sample_points(
            0.0,
            self.built.problem.endpoint(),
            self.study.samples_per_unit,
        )
    }

    fn equations(&self) -> usize {
        self.built.problem.len()
    }
}

fn header(verb: &str, extra: &str) -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let label = if extra.is_empty() {
        verb.to_string()
    } else {
        format!("{verb} {extra}")
    };
    format!(
        "# rfde {label}, version {}\n# generated at unix time {secs}\n",
        env!("CARGO_PKG_VERSION")
    )
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

fn manifest(
    exp: &Experiment<'_>,
    verb: &str,
    config_path: Option<&Path>,
    outputs: &[PathBuf],
) -> String {
    let s = &exp.study;
    let mut m = String::new();
    let _ = writeln!(m, "verb = {verb}");
    if let Some(p) = config_path {
        let _ = writeln!(m, "config = {}", p.display());
    }
    let n: Vec<String> = exp.truncations.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(m, "truncations = {}", n.join(","));
    let _ = writeln!(m, "basis = {}", s.solve.basis.name());
    let _ = writeln!(m, "tol = {:e}", s.solve.nonlinear.tol);
    let _ = writeln!(m, "max_iter = {}", s.solve.nonlinear.max_iter);
    let _ = writeln!(m, "scheme = {:?}", s.solve.nonlinear.scheme);
    let _ = writeln!(m, "samples_per_unit = {}", s.samples_per_unit);
    let _ = writeln!(m, "timing_repeats = {}", s.timing_repeats);
    match exp.oracle_step {
        Some(h) => {
            let _ = writeln!(m, "oracle_step = {h:e}");
        }
        None => {
            let _ = writeln!(m, "oracle_step = none");
        }
    }
    for o in outputs {
        let _ = writeln!(m, "output = {}", o.display());
    }
    m.push_str("\n[config]\n");
    m.push_str(exp.loaded.source());
    m
}

fn max_residuals(exp: &Experiment<'_>, sol: &rfde::SpectralSolution) -> Result<Vec<f64>, RunError> {
    let mut out = vec![0.0f64; exp.equations()];
    for t in exp.full_points() {
        let r = residual(&exp.built.problem, sol, t).map_err(|source| RunError::Solve {
            n: sol.truncation(),
            source,
        })?;
        for (m, v) in out.iter_mut().zip(r) {
            *m = m.max(v);
        }
    }
    Ok(out)
}

/// Solves at each truncation and writes samples, coefficients and a manifest.
pub fn run_solve(
    loaded: &LoadedConfig,
    overrides: &Overrides,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<RunReport, RunError> {
    let exp = Experiment::new(loaded, overrides)?;
    let truncations = exp.truncations("solver.n")?.to_vec();
    let reference = exp.reference()?;
    let points = exp.points()?;
    let p = &exp.built.problem;
    let mut records = Vec::new();
    let mut outputs = Vec::new();
    for &n in &truncations {
        let (outcome, cpu_time) = timed_solve(p, n, &exp.study.solve, exp.study.timing_repeats)
            .map_err(|source| RunError::Solve { n, source })?;
        let sol = &outcome.solution;
        let condition =
            condition_estimate(&outcome.system.matrix).map_err(|e| RunError::Solve {
                n,
                source: SolveError::Linalg(e),
            })?;
        let norms = match reference.kind() {
            ReferenceKind::None => vec![None; exp.equations()],
            _ => error_report(p, sol, &reference, &points)?
                .into_iter()
                .map(|r| Some(r.norms))
                .collect(),
        };

        let mut csv = header("solve", &format!("N={n}"));
        let cols: Vec<String> = (1..=exp.equations()).map(|i| format!("u_{i}")).collect();
        let _ = writeln!(csv, "t,{}", cols.join(","));
        for t in exp.full_points() {
            let vals: Vec<String> = sol.evaluate(t).into_iter().map(format_real).collect();
            let _ = writeln!(csv, "{},{}", format_real(t), vals.join(","));
        }
        outputs.push(write_file(out, &format!("solution_N{n}.csv"), &csv)?);

        let mut coef = header("solve", &format!("N={n} coefficients"));
        let cols: Vec<String> = (1..=exp.equations()).map(|i| format!("a_{i}")).collect();
        let _ = writeln!(coef, "k,{}", cols.join(","));
        for k in 0..=n {
            let vals: Vec<String> = sol
                .all_coefficients()
                .iter()
                .map(|a| format_real(a[k]))
                .collect();
            let _ = writeln!(coef, "{k},{}", vals.join(","));
        }
        outputs.push(write_file(out, &format!("coefficients_N{n}.csv"), &coef)?);

        records.push(RunRecord {
            n,
            coefficients: sol.all_coefficients().to_vec(),
            norms,
            max_residual: max_residuals(&exp, sol)?,
            cpu_time,
            condition,
            iterations: outcome.iterations,
        });
    }
    let mut all = outputs.clone();
    all.push(out.join("manifest.txt"));
    write_file(
        out,
        "manifest.txt",
        &manifest(&exp, "solve", config_path, &all),
    )?;
    Ok(RunReport {
        verb: "solve",
        reference: reference.kind(),
        records,
        failures: Vec::new(),
        outputs: all,
    })
}

/// Tabulates the oracle against the collocation solution for each truncation.
pub fn run_compare(
    loaded: &LoadedConfig,
    overrides: &Overrides,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<RunReport, RunError> {
    let exp = Experiment::new(loaded, overrides)?;
    let oracle = exp.oracle()?;
    let truncations = exp.truncations("solver.n_list")?.to_vec();
    let points = exp.points()?;
    let p = &exp.built.problem;
    let l = exp.equations();

    let mut records = Vec::new();
    let mut solutions = Vec::new();
    for &n in &truncations {
        let (outcome, cpu_time) = timed_solve(p, n, &exp.study.solve, exp.study.timing_repeats)
            .map_err(|source| RunError::Solve { n, source })?;
        let condition =
            condition_estimate(&outcome.system.matrix).map_err(|e| RunError::Solve {
                n,
                source: SolveError::Linalg(e),
            })?;
        let norms = error_report(p, &outcome.solution, &oracle, &points)?
            .into_iter()
            .map(|r| Some(r.norms))
            .collect();
        records.push(RunRecord {
            n,
            coefficients: outcome.solution.all_coefficients().to_vec(),
            norms,
            max_residual: max_residuals(&exp, &outcome.solution)?,
            cpu_time,
            condition,
            iterations: outcome.iterations,
        });
        solutions.push(outcome.solution);
    }

    let mut csv = header("compare", "");
    let mut cols = vec!["t".to_string()];
    for i in 1..=l {
        cols.push(format!("oracle_{i}"));
        for &n in &truncations {
            cols.push(format!("u_{i}_N{n}"));
            cols.push(format!("absdiff_{i}_N{n}"));
        }
    }
    let _ = writeln!(csv, "{}", cols.join(","));
    for &t in &points {
        let mut row = vec![format_real(t)];
        for i in 0..l {
            let o = oracle.value(i, t)?.expect("oracle has values");
            row.push(format_real(o));
            for sol in &solutions {
                let u = sol.value(i, t);
                row.push(format_real(u));
                row.push(format_real((u - o).abs()));
            }
        }
        let _ = writeln!(csv, "{}", row.join(","));
    }
    let mut outputs = vec![write_file(out, "compare.csv", &csv)?];
    outputs.push(out.join("manifest.txt"));
    write_file(
        out,
        "manifest.txt",
        &manifest(&exp, "compare", config_path, &outputs),
    )?;
    Ok(RunReport {
        verb: "compare",
        reference: ReferenceKind::MethodOfSteps,
        records,
        failures: Vec::new(),
        outputs,
    })
}

/// Column header of `convergence.csv`.
pub const CONVERGENCE_COLUMNS: &str =
    "N,equation,l2,linf,rms,cpu_time_s,condition,iterations,status";

/// Convergence table over the truncation list. Individual failures are
/// recorded; the run fails only when every truncation fails.
pub fn run_converge(
    loaded: &LoadedConfig,
    overrides: &Overrides,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<RunReport, RunError> {
    let exp = Experiment::new(loaded, overrides)?;
    let truncations = exp.truncations("solver.n_list")?.to_vec();
    let reference = exp.reference()?;
    let rows = convergence_study(&exp.built.problem, &truncations, &reference, &exp.study)?;

    let mut csv = header("converge", &format!("reference={:?}", reference.kind()));
    let _ = writeln!(csv, "{CONVERGENCE_COLUMNS}");
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for row in rows {
        match row.outcome {
            Ok(entry) => {
                for r in &entry.reports {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{},ok",
                        row.n,
                        r.equation + 1,
                        format_real(r.norms.l2),
                        format_real(r.norms.linf),
                        format_real(r.norms.rms),
                        format_real(entry.cpu_time),
                        format_real(entry.condition),
                        entry.iterations
                    );
                }
                records.push(RunRecord {
                    n: row.n,
                    coefficients: entry.solution.all_coefficients().to_vec(),
                    norms: entry.reports.iter().map(|r| Some(r.norms)).collect(),
                    max_residual: max_residuals(&exp, &entry.solution)?,
                    cpu_time: entry.cpu_time,
                    condition: entry.condition,
                    iterations: entry.iterations,
                });
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(csv, "{},,,,,,,,failed: {msg}", row.n);
                failures.push((row.n, e.to_string()));
            }
        }
    }
    if records.is_empty() {
        let (n, message) = failures[0].clone();
        return Err(RunError::AllFailed { n, message });
    }
    let mut outputs = vec![write_file(out, "convergence.csv", &csv)?];
    outputs.push(out.join("manifest.txt"));
    write_file(
        out,
        "manifest.txt",
        &manifest(&exp, "converge", config_path, &outputs),
    )?;
    Ok(RunReport {
        verb: "converge",
        reference: reference.kind(),
        records,
        failures,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateReport {
    pub checks: Vec<IdentityCheck>,
    /// Deviation of the literal `X·T·B·H` delay product at `N = 3`, `τ = 1`,
    /// `t = 1`. Large by design.
    pub literal_product_deviation: f64,
    pub outputs: Vec<PathBuf>,
}

impl ValidateReport {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<6} N={:<3} {:<24} max deviation {:.3e}",
                if c.passed { "pass" } else { "FAIL" },
                c.n,
                c.identity.label(),
                c.max_deviation
            );
        }
        let _ = writeln!(
            s,
            "literal delay product deviation at N=3, tau=1, t=1: {:.3e}",
            self.literal_product_deviation
        );
        for p in &self.outputs {
            let _ = writeln!(s, "wrote {}", p.display());
        }
        s
    }
}

/// Identities checked by `validate`.
pub const IDENTITY_SUITE: [Identity; 5] = [
    Identity::LaguerreChange,
    Identity::MonomialDerivative,
    Identity::LaguerreDerivative,
    Identity::Shift { tau: 1.0 },
    Identity::DerivativeConsistency,
];

/// Runs the identity suite for `N = 2..=10` with 100 random points each.
pub fn run_validate(out: Option<&Path>) -> Result<ValidateReport, RunError> {
    let mut checks = Vec::new();
    for identity in IDENTITY_SUITE {
        for n in 2..=10 {
            checks.push(brute_force_poly_identity(identity, n, 100, 1000 + n as u64));
        }
    }
    let (lhs, rhs) = identity_sides(Identity::LiteralDelayProduct { tau: 1.0 }, 3, 1.0);
    let mut report = ValidateReport {
        checks,
        literal_product_deviation: relative_deviation(&lhs, &rhs),
        outputs: Vec::new(),
    };
    if let Some(dir) = out {
        let mut csv = header("validate", "");
        csv.push_str("identity,N,trials,max_deviation,passed\n");
        for c in &report.checks {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                c.identity.label(),
                c.n,
                c.trials,
                format_real(c.max_deviation),
                c.passed
            );
        }
        report.outputs.push(write_file(dir, "validate.csv", &csv)?);
    }
    match report.failed() {
        0 => Ok(report),
        failed => Err(RunError::IdentityFailure { failed }),
    }
}

/// Strips `#` comment lines, leaving the deterministic part of a CSV.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
