//! Matrix collocation: assemble `W·A = G` on equally spaced points, replace
//! the last row of each equation block by its initial condition, and solve
//! for the series coefficients.
//!
//! Each collocation row for equation `l` at a point `t` reads
//!
//! ```text
//! [P(t)·D + γ·P(t)] A_l − Σ_k β_k·X(t)·T(τ_k)·H A_{j_k} = g_l(t)
//! ```
//!
//! Delay terms whose argument `t − τ_k` falls before the end of the history
//! are evaluated from the history and moved to the right-hand side. Points
//! inside a history interval that reaches past zero get interpolation rows
//! `P(t)·A_l = history_l(t)` instead.

use thiserror::Error;

use crate::basis::{
    monomial_row, BasisError, BasisKind, BasisMatrices, PolynomialBasis, MIN_TRUNCATION,
};
use crate::linalg::{gauss_solve, AugmentedSystem, DenseMatrix, LinalgError};
use crate::problem::{DdeProblem, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("collocation system is singular at N = {n} (pivot column {column})")]
    Singular { n: usize, column: usize },
    #[error(transparent)]
    Linalg(LinalgError),
    #[error("problem has nonlinear delay terms; use the nonlinear solver")]
    NonlinearProblem,
    #[error("nonlinear iteration did not converge in {iterations} iterations (last coefficient change {last_delta:e})")]
    NotConverged { iterations: usize, last_delta: f64 },
    #[error("interval end must be positive and finite, got {0}")]
    InvalidEndpoint(f64),
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
    #[error("coefficient vectors must have length {expected} and finite entries")]
    InvalidCoefficients { expected: usize },
}

impl SolveError {
    fn from_linalg(err: LinalgError, n: usize) -> Self {
        match err {
            LinalgError::Singular { column } => SolveError::Singular { n, column },
            other => SolveError::Linalg(other),
        }
    }
}

/// Points `t_i = (b/N)·i`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    points: Vec<f64>,
    step: f64,
}

impl CollocationGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn collocation_points(n: usize, b: f64) -> Result<CollocationGrid, SolveError> {
    if n < MIN_TRUNCATION {
        return Err(BasisError::TruncationTooSmall(n).into());
    }
    if !b.is_finite() || b <= 0.0 {
        return Err(SolveError::InvalidEndpoint(b));
    }
    let step = b / n as f64;
    let mut points: Vec<f64> = (0..=n).map(|i| step * i as f64).collect();
    points[n] = b;
    Ok(CollocationGrid { points, step })
}

/// Truncated series `u_{l,N}(t) = Σ_n a_{l,n}·P_n(t)` for every equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    basis: PolynomialBasis,
    coefficients: Vec<Vec<f64>>,
    derivative_coefficients: Vec<Vec<f64>>,
    b: f64,
}

impl SpectralSolution {
    pub fn new(
        basis: PolynomialBasis,
        coefficients: Vec<Vec<f64>>,
        b: f64,
    ) -> Result<Self, SolveError> {
        let len = basis.len();
        if coefficients.is_empty()
            || coefficients
                .iter()
                .any(|a| a.len() != len || a.iter().any(|x| !x.is_finite()))
        {
            return Err(SolveError::InvalidCoefficients { expected: len });
        }
        let d = basis.derivative_matrix();
        let derivative_coefficients = coefficients.iter().map(|a| d.mul_vec(a)).collect();
        Ok(SpectralSolution {
            basis,
            coefficients,
            derivative_coefficients,
            b,
        })
    }

    pub fn basis(&self) -> PolynomialBasis {
        self.basis
    }

    pub fn truncation(&self) -> usize {
        self.basis.truncation()
    }

    pub fn equations(&self) -> usize {
        self.coefficients.len()
    }

    pub fn endpoint(&self) -> f64 {
        self.b
    }

    pub fn coefficients(&self, equation: usize) -> &[f64] {
        &self.coefficients[equation]
    }

    pub fn all_coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// Outside `[0, b]` the series is still evaluated, but it is an
    /// extrapolation of the collocated polynomial.
    pub fn is_extrapolation(&self, t: f64) -> bool {
        t < 0.0 || t > self.b
    }

    pub fn value(&self, equation: usize, t: f64) -> f64 {
        dot(&self.basis.row_unchecked(t), &self.coefficients[equation])
    }

    pub fn derivative(&self, equation: usize, t: f64) -> f64 {
        dot(
            &self.basis.row_unchecked(t),
            &self.derivative_coefficients[equation],
        )
    }

    /// `u_{l,N}(t)` for every equation.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let row = self.basis.row_unchecked(t);
        self.coefficients.iter().map(|a| dot(&row, a)).collect()
    }

    /// `P(t)·D·A_l` for every equation.
    pub fn evaluate_derivative(&self, t: f64) -> Vec<f64> {
        let row = self.basis.row_unchecked(t);
        self.derivative_coefficients
            .iter()
            .map(|a| dot(&row, a))
            .collect()
    }

    fn flat(&self) -> Vec<f64> {
        self.coefficients.concat()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How nonlinear delay terms enter an assembled system.
#[derive(Debug, Clone, Copy)]
pub enum DelayTreatment<'a> {
    /// Every delay term must be linear.
    Linear,
    /// `β·f(v)` with `v` taken from the previous iterate, moved to `G`.
    Picard(&'a SpectralSolution),
    /// `β·[f(v) + f'(v)·(u − v)]`: the slope multiplies the delayed basis
    /// row in `W`, the remainder goes to `G`.
    Newton(&'a SpectralSolution),
}

impl<'a> DelayTreatment<'a> {
    fn previous(&self) -> Option<&'a SpectralSolution> {
        match *self {
            DelayTreatment::Linear => None,
            DelayTreatment::Picard(s) | DelayTreatment::Newton(s) => Some(s),
        }
    }
}

/// One assembled row of `W` (spanning every equation block) and its entry of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock {
    pub row: Vec<f64>,
    pub rhs: f64,
}

/// Everything that depends only on the problem and the basis: the grid,
/// the differentiation matrix, and `T(τ)·H` for each delay term.
#[derive(Debug, Clone)]
pub struct CollocationContext<'p> {
    problem: &'p DdeProblem,
    basis: PolynomialBasis,
    grid: CollocationGrid,
    derivative: DenseMatrix,
    delayed: Vec<Vec<DenseMatrix>>,
}

impl<'p> CollocationContext<'p> {
    pub fn new(problem: &'p DdeProblem, basis: PolynomialBasis) -> Result<Self, SolveError> {
        let grid = collocation_points(basis.truncation(), problem.endpoint())?;
        let mut cache: Vec<(f64, DenseMatrix)> = Vec::new();
        let mut delayed = Vec::with_capacity(problem.len());
        for eq in problem.equations() {
            let mut per_term = Vec::with_capacity(eq.delays.len());
            for term in &eq.delays {
                let m = match cache.iter().find(|(tau, _)| *tau == term.tau) {
                    Some((_, m)) => m.clone(),
                    None => {
                        let m = BasisMatrices::new(basis, term.tau)?.delayed_change();
                        cache.push((term.tau, m.clone()));
                        m
                    }
                };
                per_term.push(m);
            }
            delayed.push(per_term);
        }
        Ok(CollocationContext {
            problem,
            basis,
            grid,
            derivative: basis.derivative_matrix(),
            delayed,
        })
    }

    pub fn basis(&self) -> PolynomialBasis {
        self.basis
    }

    pub fn grid(&self) -> &CollocationGrid {
        &self.grid
    }

    /// Total number of unknowns, `l·(N+1)`.
    pub fn size(&self) -> usize {
        self.problem.len() * self.basis.len()
    }

    fn block(&self, equation: usize) -> std::ops::Range<usize> {
        let w = self.basis.len();
        equation * w..(equation + 1) * w
    }

    pub fn row_block(
        &self,
        equation: usize,
        t: f64,
        treatment: DelayTreatment<'_>,
    ) -> Result<RowBlock, SolveError> {
        let history = self.problem.history();
        let mut row = vec![0.0; self.size()];
        let own = self.block(equation);
        let p = self.basis.row_unchecked(t);

        if history.prescribes(t) {
            row[own].copy_from_slice(&p);
            let rhs = history.value(equation, t)?;
            return Ok(RowBlock { row, rhs });
        }

        let eq = self.problem.equation(equation);
        let pd = self.derivative.left_mul(&p);
        for ((w, d), v) in row[own].iter_mut().zip(&pd).zip(&p) {
            *w = d + eq.gamma * v;
        }
        let mut rhs = self.problem.forcing(equation, t)?;

        let x = monomial_row(self.basis.truncation(), t);
        for (term, th) in eq.delays.iter().zip(&self.delayed[equation]) {
            let s = t - term.tau;
            if history.covers(s) {
                let v = history.value(term.source, s)?;
                rhs += term.beta * term.transform.as_ref().map_or(v, |f| f.eval(v));
                continue;
            }
            let delayed_row = th.left_mul(&x);
            let (weight, shift) = match &term.transform {
                None => (term.beta, 0.0),
                Some(f) => {
                    let prev = treatment.previous().ok_or(SolveError::NonlinearProblem)?;
                    let v = prev.value(term.source, s);
                    match treatment {
                        DelayTreatment::Newton(_) => {
                            let slope = f.slope(v);
                            (term.beta * slope, term.beta * (f.eval(v) - slope * v))
                        }
                        _ => (0.0, term.beta * f.eval(v)),
                    }
                }
            };
            rhs += shift;
            if weight != 0.0 {
                for (w, d) in row[self.block(term.source)].iter_mut().zip(&delayed_row) {
                    *w -= weight * d;
                }
            }
        }
        Ok(RowBlock { row, rhs })
    }

    /// `W` and `G` with one row per equation and collocation point.
    pub fn assemble_system(
        &self,
        treatment: DelayTreatment<'_>,
    ) -> Result<AugmentedSystem, SolveError> {
        let n = self.size();
        let mut matrix = DenseMatrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        let w = self.basis.len();
        for equation in 0..self.problem.len() {
            for (i, &t) in self.grid.points().iter().enumerate() {
                let rb = self.row_block(equation, t, treatment)?;
                let r = equation * w + i;
                matrix.row_mut(r).copy_from_slice(&rb.row);
                rhs[r] = rb.rhs;
            }
        }
        AugmentedSystem::new(matrix, rhs).map_err(SolveError::Linalg)
    }

    /// The row `P(t₀)` in equation block `l`, where `t₀` is the start time.
    pub fn condition_row(&self, equation: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.size()];
        row[self.block(equation)]
            .copy_from_slice(&self.basis.row_unchecked(self.problem.start_time()));
        row
    }

    /// Replaces the last row of each equation block by `P(t₀)·A_l = φ_l`.
    pub fn apply_initial_conditions(&self, mut system: AugmentedSystem) -> AugmentedSystem {
        let w = self.basis.len();
        for equation in 0..self.problem.len() {
            let r = equation * w + (w - 1);
            let row = self.condition_row(equation);
            system.replace_row(r, &row, self.problem.equation(equation).phi);
        }
        system
    }

    fn solve_system(&self, system: &AugmentedSystem) -> Result<SpectralSolution, SolveError> {
        let flat =
            gauss_solve(system).map_err(|e| SolveError::from_linalg(e, self.basis.truncation()))?;
        let coefficients = flat.chunks(self.basis.len()).map(<[f64]>::to_vec).collect();
        SpectralSolution::new(self.basis, coefficients, self.problem.endpoint())
    }

    /// Conditioned system for the given treatment of delay terms.
    pub fn augmented_system(
        &self,
        treatment: DelayTreatment<'_>,
    ) -> Result<AugmentedSystem, SolveError> {
        Ok(self.apply_initial_conditions(self.assemble_system(treatment)?))
    }

    /// Constant iterate holding each history at its right end.
    pub fn initial_iterate(&self) -> Result<SpectralSolution, SolveError> {
        let history = self.problem.history();
        let coefficients = (0..self.problem.len())
            .map(|eq| {
                let mut a = vec![0.0; self.basis.len()];
                a[0] = history.value(eq, history.end())?;
                Ok(a)
            })
            .collect::<Result<Vec<_>, SolveError>>()?;
        SpectralSolution::new(self.basis, coefficients, self.problem.endpoint())
    }
}

/// Linear Laguerre system with conditions not yet applied.
pub fn assemble_system(problem: &DdeProblem, n: usize) -> Result<AugmentedSystem, SolveError> {
    CollocationContext::new(problem, PolynomialBasis::laguerre(n)?)?
        .assemble_system(DelayTreatment::Linear)
}

pub fn apply_initial_conditions(
    system: AugmentedSystem,
    problem: &DdeProblem,
    basis: PolynomialBasis,
) -> Result<AugmentedSystem, SolveError> {
    let ctx = CollocationContext::new(problem, basis)?;
    let expected = ctx.size();
    if system.size() != expected {
        return Err(SolveError::Linalg(LinalgError::DimensionMismatch {
            expected,
            found: system.size(),
        }));
    }
    Ok(ctx.apply_initial_conditions(system))
}

/// Laguerre collocation solve of a linear problem.
pub fn solve_linear(problem: &DdeProblem, n: usize) -> Result<SpectralSolution, SolveError> {
    solve_linear_in(problem, PolynomialBasis::laguerre(n)?)
}

pub fn solve_linear_in(
    problem: &DdeProblem,
    basis: PolynomialBasis,
) -> Result<SpectralSolution, SolveError> {
    if !problem.is_linear() {
        return Err(SolveError::NonlinearProblem);
    }
    let ctx = CollocationContext::new(problem, basis)?;
    ctx.solve_system(&ctx.augmented_system(DelayTreatment::Linear)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearScheme {
    /// Successive substitution: nonlinear terms frozen at the previous iterate.
    Picard,
    /// Linearization of each nonlinear delay term about the previous iterate.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearOptions {
    /// Stop once `‖ΔA‖∞ ≤ tol · max(1, ‖A‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: NonlinearScheme,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            tol: 1e-8,
            max_iter: 50,
            scheme: NonlinearScheme::Newton,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub solution: SpectralSolution,
    /// Number of linear solves performed.
    pub iterations: usize,
    pub last_delta: f64,
}

/// Nonlinear Laguerre solve with the default (Newton) scheme.
pub fn solve_nonlinear(
    problem: &DdeProblem,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<NonlinearSolution, SolveError> {
    let opts = NonlinearOptions {
        tol,
        max_iter,
        ..NonlinearOptions::default()
    };
    solve_nonlinear_in(problem, PolynomialBasis::laguerre(n)?, &opts)
}

pub fn solve_nonlinear_in(
    problem: &DdeProblem,
    basis: PolynomialBasis,
    opts: &NonlinearOptions,
) -> Result<NonlinearSolution, SolveError> {
    Ok(iterate(&CollocationContext::new(problem, basis)?, opts)?.0)
}

fn iterate(
    ctx: &CollocationContext<'_>,
    opts: &NonlinearOptions,
) -> Result<(NonlinearSolution, AugmentedSystem), SolveError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(SolveError::InvalidOption(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 {
        return Err(SolveError::InvalidOption(
            "max_iter must be at least 1".into(),
        ));
    }
    let mut current = ctx.initial_iterate()?;
    let mut last_system: Option<AugmentedSystem> = None;
    let mut last_delta = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let treatment = match opts.scheme {
            NonlinearScheme::Picard => DelayTreatment::Picard(&current),
            NonlinearScheme::Newton => DelayTreatment::Newton(&current),
        };
        let system = ctx.augmented_system(treatment)?;
        if last_system.as_ref() == Some(&system) {
            // Same system as the previous solve, so the same coefficients.
            return Ok((
                NonlinearSolution {
                    solution: current,
                    iterations: k - 1,
                    last_delta: 0.0,
                },
                system,
            ));
        }
        let next = ctx.solve_system(&system)?;
        let (prev, new) = (current.flat(), next.flat());
        last_delta = prev
            .iter()
            .zip(&new)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
        let scale = new.iter().fold(1.0, |m: f64, a| m.max(a.abs()));
        current = next;
        if last_delta <= opts.tol * scale {
            return Ok((
                NonlinearSolution {
                    solution: current,
                    iterations: k,
                    last_delta,
                },
                system,
            ));
        }
        last_system = Some(system);
    }
    Err(SolveError::NotConverged {
        iterations: opts.max_iter,
        last_delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub basis: BasisKind,
    pub nonlinear: NonlinearOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            basis: BasisKind::Laguerre,
            nonlinear: NonlinearOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: SpectralSolution,
    pub iterations: usize,
    /// The final conditioned system, kept for diagnostics.
    pub system: AugmentedSystem,
}

/// Solves a linear or nonlinear problem at truncation `n`.
pub fn solve(
    problem: &DdeProblem,
    n: usize,
    opts: &SolveOptions,
) -> Result<SolveOutcome, SolveError> {
    let basis = PolynomialBasis::new(opts.basis, n)?;
    let ctx = CollocationContext::new(problem, basis)?;
    if problem.is_linear() {
        let system = ctx.augmented_system(DelayTreatment::Linear)?;
        let solution = ctx.solve_system(&system)?;
        Ok(SolveOutcome {
            solution,
            iterations: 1,
            system,
        })
    } else {
        let (nl, system) = iterate(&ctx, &opts.nonlinear)?;
        Ok(SolveOutcome {
            solution: nl.solution,
            iterations: nl.iterations,
            system,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{constant_fn, scalar_fn, DelayTerm, Equation, History, Transform};

    fn single(gamma: f64, beta: f64, tau: f64, g: f64, phi: f64, b: f64) -> DdeProblem {
        DdeProblem::new(
            vec![Equation::new(gamma)
                .delay(DelayTerm::linear(0, beta, tau))
                .forcing(constant_fn(g))
                .phi(phi)],
            History::constant(&[phi]),
            b,
        )
        .unwrap()
    }

    #[test]
    fn grid_points() {
        assert_eq!(
            collocation_points(2, 1.0).unwrap().points(),
            &[0.0, 0.5, 1.0]
        );
        assert_eq!(
            collocation_points(4, 2.0).unwrap().points(),
            &[0.0, 0.5, 1.0, 1.5, 2.0]
        );
        let g = collocation_points(3, 5.0).unwrap();
        let expect = [0.0, 5.0 / 3.0, 10.0 / 3.0, 5.0];
        for (a, b) in g.points().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(collocation_points(1, 1.0).is_err());
        assert_eq!(
            collocation_points(3, 0.0),
            Err(SolveError::InvalidEndpoint(0.0))
        );
    }

    #[test]
    fn row_without_gamma_or_beta_is_pure_derivative() {
        let p = single(0.0, 0.0, 1.0, 1.0, 0.0, 2.0);
        let basis = PolynomialBasis::laguerre(3).unwrap();
        let ctx = CollocationContext::new(&p, basis).unwrap();
        let c = basis.derivative_matrix();
        for &t in &[0.0, 0.7, 1.9] {
            let rb = ctx.row_block(0, t, DelayTreatment::Linear).unwrap();
            assert_eq!(rb.rhs, 1.0);
            assert_eq!(rb.row, c.left_mul(&basis.row_unchecked(t)));
        }
    }

    #[test]
    fn row_with_gamma_at_zero() {
        let p = single(1.0, 0.0, 1.0, 0.0, 0.0, 1.0);
        let ctx = CollocationContext::new(&p, PolynomialBasis::laguerre(2).unwrap()).unwrap();
        let rb = ctx.row_block(0, 0.0, DelayTreatment::Linear).unwrap();
        assert_eq!(rb.row, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn zero_delay_collapses_to_undelayed_row() {
        let p = single(0.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let basis = PolynomialBasis::laguerre(4).unwrap();
        let ctx = CollocationContext::new(&p, basis).unwrap();
        let c = basis.derivative_matrix();
        for &t in &[0.0, 0.25, 1.0] {
            let rb = ctx.row_block(0, t, DelayTreatment::Linear).unwrap();
            let l = basis.row_unchecked(t);
            let expect: Vec<f64> = c.left_mul(&l).iter().zip(&l).map(|(a, b)| a - b).collect();
            for (a, b) in rb.row.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn homogeneous_system_has_derivative_rows() {
        let p = single(0.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        let sys = assemble_system(&p, 2).unwrap();
        assert_eq!(sys.rhs, vec![0.0; 3]);
        let basis = PolynomialBasis::laguerre(2).unwrap();
        let c = basis.derivative_matrix();
        for (i, t) in [0.0, 0.5, 1.0].iter().enumerate() {
            assert_eq!(
                sys.matrix.row(i),
                c.left_mul(&basis.row_unchecked(*t)).as_slice()
            );
        }
    }

    #[test]
    fn condition_row_replaces_last_row() {
        let p = single(0.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        let basis = PolynomialBasis::laguerre(2).unwrap();
        let sys = apply_initial_conditions(assemble_system(&p, 2).unwrap(), &p, basis).unwrap();
        assert_eq!(sys.matrix.row(2), &[1.0, 1.0, 1.0]);
        assert_eq!(sys.rhs[2], 1.0);
    }

    #[test]
    fn constant_solution() {
        let p = single(0.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        let s = solve_linear(&p, 2).unwrap();
        let a = s.coefficients(0);
        assert!((a[0] - 1.0).abs() < 1e-14 && a[1].abs() < 1e-14 && a[2].abs() < 1e-14);
    }

    #[test]
    fn manufactured_linear_solution() {
        // u(t) = t solves u' = -u + u(t-1) + g with g = 1 + t - (t - 1) = 2.
        let p = DdeProblem::new(
            vec![Equation::new(1.0)
                .delay(DelayTerm::linear(0, 1.0, 1.0))
                .forcing(constant_fn(2.0))
                .phi(0.0)],
            History::before_zero(vec![scalar_fn(|t| t)]),
            2.0,
        )
        .unwrap();
        let s = solve_linear(&p, 2).unwrap();
        let expect = [1.0, -1.0, 0.0];
        for (a, b) in s.coefficients(0).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-8, "{:?}", s.coefficients(0));
        }
    }

    #[test]
    fn evaluation() {
        let basis = PolynomialBasis::laguerre(3).unwrap();
        let one = SpectralSolution::new(basis, vec![vec![1.0, 0.0, 0.0, 0.0]], 1.0).unwrap();
        assert_eq!(one.evaluate(2.3), vec![1.0]);
        assert_eq!(one.evaluate_derivative(2.3), vec![0.0]);
        let l1 = SpectralSolution::new(basis, vec![vec![0.0, 1.0, 0.0, 0.0]], 1.0).unwrap();
        assert_eq!(l1.value(0, 1.0), 0.0);
        let t = SpectralSolution::new(basis, vec![vec![1.0, -1.0, 0.0, 0.0]], 1.0).unwrap();
        assert!((t.value(0, 0.7) - 0.7).abs() < 1e-15);
        assert!((t.derivative(0, 0.3) - 1.0).abs() < 1e-15);
        let l2 = SpectralSolution::new(basis, vec![vec![0.0, 0.0, 1.0, 0.0]], 1.0).unwrap();
        assert!((l2.derivative(0, 0.0) + 2.0).abs() < 1e-15);
        assert!(l2.is_extrapolation(1.5) && !l2.is_extrapolation(0.5));
        assert!(SpectralSolution::new(basis, vec![vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn linear_solver_rejects_nonlinear_problem() {
        let p = DdeProblem::new(
            vec![Equation::new(0.0).delay(DelayTerm::nonlinear(
                0,
                1.0,
                1.0,
                Transform::new(constant_fn(1.0)),
            ))],
            History::constant(&[0.0]),
            1.0,
        )
        .unwrap();
        assert_eq!(solve_linear(&p, 3), Err(SolveError::NonlinearProblem));
    }

    #[test]
    fn nonlinear_options_validated() {
        let p = single(0.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            solve_nonlinear(&p, 3, 0.0, 5),
            Err(SolveError::InvalidOption(_))
        ));
        assert!(matches!(
            solve_nonlinear(&p, 3, 1e-8, 0),
            Err(SolveError::InvalidOption(_))
        ));
    }

    #[test]
    fn coupled_system_places_cross_block() {
        // u1' = u1(t-2), u2' = u1(t-2) + u2(t-0.5) with history 1.
        let p = DdeProblem::new(
            vec![
                Equation::new(0.0)
                    .delay(DelayTerm::linear(0, 1.0, 2.0))
                    .phi(1.0),
                Equation::new(0.0)
                    .delay(DelayTerm::linear(0, 1.0, 2.0))
                    .delay(DelayTerm::linear(1, 1.0, 0.5))
                    .phi(1.0),
            ],
            History::constant(&[1.0, 1.0]),
            5.0,
        )
        .unwrap();
        let n = 4;
        let sys = assemble_system(&p, n).unwrap();
        assert_eq!(sys.size(), 2 * (n + 1));
        // Row of u2 at t = 5: u1(3) enters the first block.
        let last = sys.matrix.row(2 * (n + 1) - 1);
        assert!(last[..n + 1].iter().any(|x| *x != 0.0));
        // Rows of u1 never touch the u2 block.
        for i in 0..=n {
            assert!(sys.matrix.row(i)[n + 1..].iter().all(|x| *x == 0.0));
        }
        // At t = 0 both delayed values come from the history.
        assert_eq!(sys.rhs[0], 1.0);
        assert_eq!(sys.rhs[n + 1], 2.0);
        let conditioned =
            apply_initial_conditions(sys, &p, PolynomialBasis::laguerre(n).unwrap()).unwrap();
        assert_eq!(&conditioned.matrix.row(n)[..n + 1], &[1.0; 5]);
        assert_eq!(&conditioned.matrix.row(2 * n + 1)[n + 1..], &[1.0; 5]);
    }
}
