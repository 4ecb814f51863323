//! Residuals, error norms and convergence studies.

use std::time::Instant;

use thiserror::Error;

use crate::collocation::{solve, SolveError, SolveOptions, SolveOutcome, SpectralSolution};
use crate::linalg::condition_estimate;
use crate::problem::{DdeProblem, ScalarFn};
use crate::reference::{ReferenceError, Trajectory};

/// Sample intervals per unit of `t`: 11 points on every unit interval.
pub const DEFAULT_SAMPLES_PER_UNIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccuracyError {
    #[error("error norms need at least one sample")]
    EmptySamples,
    #[error("the list of truncations is empty")]
    EmptyTruncations,
    #[error("window [{0}, {1}] is not a valid sub-interval of [0, b]")]
    InvalidWindow(f64, f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("reference has {found} functions but the problem has {expected} equations")]
    ReferenceMismatch { expected: usize, found: usize },
}

/// `l2 = (Σ e²)^½`, `linf = max |e|`, `rms = (Σ e² / count)^½`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
    pub rms: f64,
}

pub fn error_norms(errors: &[f64]) -> Result<ErrorNorms, AccuracyError> {
    if errors.is_empty() {
        return Err(AccuracyError::EmptySamples);
    }
    let sum_sq: f64 = errors.iter().map(|e| e * e).sum();
    let linf = errors.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    Ok(ErrorNorms {
        l2: sum_sq.sqrt(),
        linf,
        rms: (sum_sq / errors.len() as f64).sqrt(),
    })
}

/// Equally spaced points on `[a, c]`, `per_unit` intervals per unit length
/// (at least one interval).
pub fn sample_points(a: f64, c: f64, per_unit: usize) -> Vec<f64> {
    let intervals = (((c - a) * per_unit as f64) - 1e-9).ceil().max(1.0) as usize;
    let h = (c - a) / intervals as f64;
    let mut pts: Vec<f64> = (0..=intervals).map(|i| a + h * i as f64).collect();
    pts[intervals] = c;
    pts
}

/// Absolute defect `|u' + γu − Σβ·f(u(t−τ)) − g|` of each equation at `t`.
///
/// Inside a prescribed history interval the defect is `|u − history|`.
pub fn residual(
    problem: &DdeProblem,
    solution: &SpectralSolution,
    t: f64,
) -> Result<Vec<f64>, SolveError> {
    let history = problem.history();
    let mut out = Vec::with_capacity(problem.len());
    for (i, eq) in problem.equations().iter().enumerate() {
        if history.prescribes(t) {
            out.push((solution.value(i, t) - history.value(i, t)?).abs());
            continue;
        }
        let mut defect =
            solution.derivative(i, t) + eq.gamma * solution.value(i, t) - problem.forcing(i, t)?;
        for term in &eq.delays {
            let s = t - term.tau;
            let v = if history.covers(s) {
                history.value(term.source, s)?
            } else {
                solution.value(term.source, s)
            };
            defect -= term.beta * term.transform.as_ref().map_or(v, |f| f.eval(v));
        }
        out.push(defect.abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Exact,
    MethodOfSteps,
    None,
}

/// What a solution is measured against.
#[derive(Clone)]
pub enum Reference {
    /// Closed-form solution, one function per equation.
    Exact(Vec<ScalarFn>),
    MethodOfSteps(Trajectory),
    /// No reference: norms are taken over residuals.
    None,
}

impl Reference {
    pub fn kind(&self) -> ReferenceKind {
        match self {
            Reference::Exact(_) => ReferenceKind::Exact,
            Reference::MethodOfSteps(_) => ReferenceKind::MethodOfSteps,
            Reference::None => ReferenceKind::None,
        }
    }

    /// Reference value, or `None` for the residual-only reference.
    pub fn value(&self, equation: usize, t: f64) -> Result<Option<f64>, AccuracyError> {
        Ok(match self {
            Reference::Exact(f) => Some(f[equation](t)),
            Reference::MethodOfSteps(tr) => Some(tr.value(equation, t)?),
            Reference::None => None,
        })
    }

    fn check(&self, equations: usize) -> Result<(), AccuracyError> {
        let found = match self {
            Reference::Exact(f) => f.len(),
            Reference::MethodOfSteps(tr) => tr.equations(),
            Reference::None => return Ok(()),
        };
        if found == equations {
            Ok(())
        } else {
            Err(AccuracyError::ReferenceMismatch {
                expected: equations,
                found,
            })
        }
    }
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Reference::{:?}", self.kind())
    }
}

/// Per-equation errors at sample points and their norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub equation: usize,
    pub points: Vec<f64>,
    /// `u(t) − u_N(t)`, or the residual when there is no reference.
    pub errors: Vec<f64>,
    pub norms: ErrorNorms,
    pub reference: ReferenceKind,
}

pub fn error_report(
    problem: &DdeProblem,
    solution: &SpectralSolution,
    reference: &Reference,
    points: &[f64],
) -> Result<Vec<ErrorReport>, AccuracyError> {
    if points.is_empty() {
        return Err(AccuracyError::EmptySamples);
    }
    reference.check(problem.len())?;
    let mut errors = vec![Vec::with_capacity(points.len()); problem.len()];
    for &t in points {
        match reference {
            Reference::None => {
                for (e, r) in errors.iter_mut().zip(residual(problem, solution, t)?) {
                    e.push(r);
                }
            }
            _ => {
                for (i, e) in errors.iter_mut().enumerate() {
                    let exact = reference.value(i, t)?.expect("reference has values");
                    e.push(exact - solution.value(i, t));
                }
            }
        }
    }
    errors
        .into_iter()
        .enumerate()
        .map(|(equation, errors)| {
            Ok(ErrorReport {
                equation,
                points: points.to_vec(),
                norms: error_norms(&errors)?,
                errors,
                reference: reference.kind(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub solve: SolveOptions,
    /// Sub-interval of `[0, b]` on which errors are measured.
    pub window: Option<(f64, f64)>,
    pub samples_per_unit: usize,
    /// Each solve is repeated this many times and the fastest run is kept.
    pub timing_repeats: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            solve: SolveOptions::default(),
            window: None,
            samples_per_unit: DEFAULT_SAMPLES_PER_UNIT,
            timing_repeats: 1,
        }
    }
}

impl StudyOptions {
    pub fn points(&self, problem: &DdeProblem) -> Result<Vec<f64>, AccuracyError> {
        let b = problem.endpoint();
        let (a, c) = self.window.unwrap_or((0.0, b));
        if !(a >= 0.0 && c <= b && a < c) {
            return Err(AccuracyError::InvalidWindow(a, c));
        }
        Ok(sample_points(a, c, self.samples_per_unit.max(1)))
    }
}

/// Solves `repeats` times (at least once) and returns the outcome along
/// with the fastest wall-clock time in seconds.
pub fn timed_solve(
    problem: &DdeProblem,
    n: usize,
    opts: &SolveOptions,
    repeats: usize,
) -> Result<(SolveOutcome, f64), SolveError> {
    let mut best = f64::INFINITY;
    let mut outcome = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let o = solve(problem, n, opts)?;
        best = best.min(start.elapsed().as_secs_f64());
        outcome = Some(o);
    }
    Ok((outcome.expect("at least one solve"), best))
}

#[derive(Debug, Clone)]
pub struct ConvergenceEntry {
    pub reports: Vec<ErrorReport>,
    pub cpu_time: f64,
    pub condition: f64,
    pub iterations: usize,
    pub solution: SpectralSolution,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    /// A failed solve is recorded here instead of aborting the study.
    pub outcome: Result<ConvergenceEntry, AccuracyError>,
}

pub fn convergence_study(
    problem: &DdeProblem,
    truncations: &[usize],
    reference: &Reference,
    opts: &StudyOptions,
) -> Result<Vec<ConvergenceRow>, AccuracyError> {
    if truncations.is_empty() {
        return Err(AccuracyError::EmptyTruncations);
    }
    reference.check(problem.len())?;
    let points = opts.points(problem)?;
    Ok(truncations
        .iter()
        .map(|&n| ConvergenceRow {
            n,
            outcome: study_one(problem, n, reference, opts, &points),
        })
        .collect())
}

fn study_one(
    problem: &DdeProblem,
    n: usize,
    reference: &Reference,
    opts: &StudyOptions,
    points: &[f64],
) -> Result<ConvergenceEntry, AccuracyError> {
    let (outcome, cpu_time) = timed_solve(problem, n, &opts.solve, opts.timing_repeats)?;
    let condition = condition_estimate(&outcome.system.matrix)
        .map_err(|e| AccuracyError::Solve(SolveError::Linalg(e)))?;
    let reports = error_report(problem, &outcome.solution, reference, points)?;
    Ok(ConvergenceEntry {
        reports,
        cpu_time,
        condition,
        iterations: outcome.iterations,
        solution: outcome.solution,
    })
}
