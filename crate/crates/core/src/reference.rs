//! Independent oracles.
//!
//! [`rk4_method_of_steps`] integrates the delay system with classical RK4 on
//! a step grid aligned with every delay, so the breaking points `k·τ` are
//! grid points and delayed values always come from already computed steps.
//! Off-grid delayed queries use cubic Hermite interpolation with the stored
//! derivatives, which keeps the fourth-order accuracy between breaking points.
//!
//! [`brute_force_poly_identity`] checks the matrix identities of the basis
//! module against direct polynomial evaluation at random points.

use std::io::{self, Write};

use rand::{rngs::StdRng, Rng, SeedableRng};
use thiserror::Error;

use crate::basis::{basis_row, build_basis_matrices, monomial_row, PolynomialBasis};
use crate::problem::{DdeProblem, History, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("history has {found} functions but the problem has {expected} equations")]
    HistoryMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("trajectory queried at t = {t}, outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("delayed value at t = {t} is not yet computed")]
    DelayBeyondComputed { t: f64 },
    #[error("equation {0} does not exist")]
    UnknownEquation(usize),
}

/// Fixed-step samples `(t_k, u(t_k), u'(t_k))` with cubic Hermite
/// interpolation between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    derivatives: Vec<Vec<f64>>,
    step: f64,
    aligned: bool,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Stored values at grid point `k`, one per equation.
    pub fn values_at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn equations(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// False when the delays were incommensurate and the grid could not be
    /// aligned with every breaking point.
    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn value(&self, equation: usize, t: f64) -> Result<f64, ReferenceError> {
        if equation >= self.equations() {
            return Err(ReferenceError::UnknownEquation(equation));
        }
        let (start, end) = (self.start(), self.end());
        let slack = 1e-12 * end.abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(ReferenceError::OutOfRange { t, start, end });
        }
        Ok(self.interpolate(equation, t.clamp(start, end), self.times.len() - 1))
    }

    /// Cubic Hermite interpolation using samples `0..=last`.
    fn interpolate(&self, equation: usize, t: f64, last: usize) -> f64 {
        let times = &self.times[..=last];
        let j = times.partition_point(|&x| x <= t);
        if j == 0 {
            return self.values[0][equation];
        }
        let j = j - 1;
        if times[j] == t || j == last {
            return self.values[j][equation];
        }
        let (t0, t1) = (times[j], times[j + 1]);
        let h = t1 - t0;
        let x = (t - t0) / h;
        let (x2, x3) = (x * x, x * x * x);
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        h00 * self.values[j][equation]
            + h10 * h * self.derivatives[j][equation]
            + h01 * self.values[j + 1][equation]
            + h11 * h * self.derivatives[j + 1][equation]
    }

    /// CSV with header `t,u_1,…,u_l` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.equations()).map(|i| format!("u_{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let fields: Vec<String> = std::iter::once(format_real(*t))
                .chain(row.iter().map(|v| format_real(*v)))
                .collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Formats a real with 17 significant digits and a '.' decimal separator.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Largest `g` such that every value is an integer multiple of `g`, found by
/// searching small denominators. `None` when the values are incommensurate.
fn common_divisor(values: &[f64]) -> Option<f64> {
    const MAX_DENOMINATOR: u64 = 10_000;
    for q in 1..=MAX_DENOMINATOR {
        let qf = q as f64;
        let ints: Option<Vec<u64>> = values
            .iter()
            .map(|&v| {
                let scaled = v * qf;
                let r = scaled.round();
                ((scaled - r).abs() <= 1e-9 * scaled.abs().max(1.0) && r >= 1.0).then_some(r as u64)
            })
            .collect();
        if let Some(ints) = ints {
            let g = ints.into_iter().reduce(gcd)?;
            return Some(g as f64 / qf);
        }
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn central_difference(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-6 * t.abs().max(1.0);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

struct Integrator<'a> {
    problem: &'a DdeProblem,
    history: &'a History,
    traj: Trajectory,
}

impl Integrator<'_> {
    fn delayed(
        &self,
        source: usize,
        tau: f64,
        t: f64,
        stage: &[f64],
    ) -> Result<f64, ReferenceError> {
        if tau == 0.0 {
            return Ok(stage[source]);
        }
        let s = t - tau;
        if self.history.covers(s) {
            return Ok(self.history.value(source, s)?);
        }
        let last = self.traj.times.len() - 1;
        let computed = self.traj.times[last];
        if s > computed + 1e-9 * self.traj.step {
            return Err(ReferenceError::DelayBeyondComputed { t: s });
        }
        Ok(self.traj.interpolate(source, s.min(computed), last))
    }

    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, ReferenceError> {
        let mut dy = Vec::with_capacity(y.len());
        for (i, eq) in self.problem.equations().iter().enumerate() {
            let mut d = -eq.gamma * y[i] + self.problem.forcing(i, t)?;
            for term in &eq.delays {
                let v = self.delayed(term.source, term.tau, t, y)?;
                d += term.beta * term.transform.as_ref().map_or(v, |f| f.eval(v));
            }
            dy.push(d);
        }
        Ok(dy)
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Classical RK4 over `[0, b]` by the method of steps.
///
/// The step is reduced to `g / ceil(g / step)` where `g` is the largest
/// common divisor of the delays (and of the history end, when positive).
/// The trajectory starts at the history end with the value `φ_l`; samples
/// before it are the history itself.
pub fn rk4_method_of_steps(
    problem: &DdeProblem,
    history: &History,
    step: f64,
) -> Result<Trajectory, ReferenceError> {
    if !step.is_finite() || step <= 0.0 {
        return Err(ReferenceError::InvalidStep(step));
    }
    let l = problem.len();
    if history.len() != l {
        return Err(ReferenceError::HistoryMismatch {
            expected: l,
            found: history.len(),
        });
    }
    let b = problem.endpoint();
    let t0 = history.end().max(0.0);

    let mut anchors: Vec<f64> = problem.delays().filter(|&tau| tau > 0.0).collect();
    if t0 > 0.0 {
        anchors.push(t0);
    }
    let (h, aligned) = match common_divisor(&anchors) {
        Some(g) => (g / (g / step).ceil(), true),
        None if anchors.is_empty() => (step, true),
        None => {
            let min_anchor = anchors.iter().copied().fold(f64::INFINITY, f64::min);
            (step.min(min_anchor), false)
        }
    };

    let mut integ = Integrator {
        problem,
        history,
        traj: Trajectory {
            times: Vec::new(),
            values: Vec::new(),
            derivatives: Vec::new(),
            step: h,
            aligned,
        },
    };

    // Prescribed part of [0, b].
    let mut k = 0usize;
    while t0 > 0.0 && (k as f64) * h < t0 - 1e-9 * h {
        let t = k as f64 * h;
        let mut vals = Vec::with_capacity(l);
        let mut ders = Vec::with_capacity(l);
        for eq in 0..l {
            vals.push(history.value(eq, t)?);
            let f = history.function(eq);
            ders.push(central_difference(|x| f(x), t));
        }
        integ.traj.times.push(t);
        integ.traj.values.push(vals);
        integ.traj.derivatives.push(ders);
        k += 1;
    }

    let y0: Vec<f64> = problem.equations().iter().map(|e| e.phi).collect();
    integ.traj.times.push(t0);
    integ.traj.values.push(y0.clone());
    let d0 = integ.rhs(t0, &y0)?;
    integ.traj.derivatives.push(d0.clone());

    let steps = ((b - t0) / h - 1e-9).ceil().max(0.0) as usize;
    let mut y = y0;
    let mut k1 = d0;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let t_next = if i + 1 == steps {
            b
        } else {
            t0 + (i + 1) as f64 * h
        };
        let dt = t_next - t;
        let k2 = integ.rhs(t + 0.5 * dt, &axpy(&y, 0.5 * dt, &k1))?;
        let k3 = integ.rhs(t + 0.5 * dt, &axpy(&y, 0.5 * dt, &k2))?;
        let k4 = integ.rhs(t_next, &axpy(&y, dt, &k3))?;
        y = y
            .iter()
            .enumerate()
            .map(|(j, v)| v + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        k1 = integ.rhs(t_next, &y)?;
        integ.traj.times.push(t_next);
        integ.traj.values.push(y.clone());
        integ.traj.derivatives.push(k1.clone());
    }
    Ok(integ.traj)
}

/// Threshold on the relative deviation below which an identity passes.
pub const IDENTITY_THRESHOLD: f64 = 1e-9;

/// Row-vector identities checked by [`brute_force_poly_identity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Identity {
    /// `L(t) = X(t)·H`.
    LaguerreChange,
    /// `X'(t) = X(t)·B`.
    MonomialDerivative,
    /// `L'(t) = L(t)·C`.
    LaguerreDerivative,
    /// `[1 (t−τ) … (t−τ)^N] = X(t)·T(τ)`.
    Shift { tau: f64 },
    /// `X(t)·B·H = L(t)·C`, i.e. `BH = HC`.
    DerivativeConsistency,
    /// `L(t−τ)` against the product `X(t)·T(τ)·B·H`. Expected to fail.
    LiteralDelayProduct { tau: f64 },
}

impl Identity {
    pub fn label(&self) -> String {
        match self {
            Identity::LaguerreChange => "L(t) = X(t)H".into(),
            Identity::MonomialDerivative => "X'(t) = X(t)B".into(),
            Identity::LaguerreDerivative => "L'(t) = L(t)C".into(),
            Identity::Shift { tau } => format!("X(t-{tau}) = X(t)T({tau})"),
            Identity::DerivativeConsistency => "X(t)BH = L(t)C".into(),
            Identity::LiteralDelayProduct { tau } => format!("L(t-{tau}) = X(t)T({tau})BH"),
        }
    }
}

/// `C(n, k)` by the multiplicative formula.
fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// `L_n(t)` from the explicit alternating sum.
pub fn laguerre_explicit(n: usize, t: f64) -> f64 {
    (0..=n)
        .map(|k| (-1f64).powi(k as i32) / factorial(k) * binomial(n, k) * t.powi(k as i32))
        .sum()
}

/// `L_n'(t)` by termwise differentiation of the explicit sum.
pub fn laguerre_derivative_explicit(n: usize, t: f64) -> f64 {
    (1..=n)
        .map(|k| {
            (-1f64).powi(k as i32) / factorial(k) * binomial(n, k) * k as f64 * t.powi(k as i32 - 1)
        })
        .sum()
}

/// Both sides of an identity at truncation `n` and point `t`.
pub fn identity_sides(identity: Identity, n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let tau = match identity {
        Identity::Shift { tau } | Identity::LiteralDelayProduct { tau } => tau,
        _ => 0.0,
    };
    let m = build_basis_matrices(n, tau).expect("truncation and delay validated by caller");
    let basis = m.basis();
    let x = monomial_row(n, t);
    let lag = |s: f64| basis_row(&basis, s).unwrap_or_else(|_| plain_row(&basis, s));
    match identity {
        Identity::LaguerreChange => (lag(t), m.change.left_mul(&x)),
        Identity::MonomialDerivative => {
            let lhs = (0..=n)
                .map(|k| {
                    if k == 0 {
                        0.0
                    } else {
                        k as f64 * t.powi(k as i32 - 1)
                    }
                })
                .collect();
            (lhs, m.monomial_derivative.left_mul(&x))
        }
        Identity::LaguerreDerivative => {
            let lhs = (0..=n)
                .map(|k| laguerre_derivative_explicit(k, t))
                .collect();
            (lhs, m.derivative.left_mul(&lag(t)))
        }
        Identity::Shift { tau } => {
            let lhs = (0..=n).map(|k| (t - tau).powi(k as i32)).collect();
            (lhs, m.shift.left_mul(&x))
        }
        Identity::DerivativeConsistency => {
            let bh = &m.monomial_derivative * &m.change;
            (bh.left_mul(&x), m.derivative.left_mul(&lag(t)))
        }
        Identity::LiteralDelayProduct { tau } => {
            let tbh = &(&m.shift * &m.monomial_derivative) * &m.change;
            (plain_row(&basis, t - tau), tbh.left_mul(&x))
        }
    }
}

fn plain_row(basis: &PolynomialBasis, t: f64) -> Vec<f64> {
    (0..=basis.truncation())
        .map(|k| laguerre_explicit(k, t))
        .collect()
}

/// Deviation `‖lhs − rhs‖∞ / max(1, ‖lhs‖∞)`.
pub fn relative_deviation(lhs: &[f64], rhs: &[f64]) -> f64 {
    let scale = lhs.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    let diff = lhs
        .iter()
        .zip(rhs)
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    diff / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub identity: Identity,
    pub n: usize,
    pub trials: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Evaluates both sides of `identity` at `trials` random points in `[0, 5]`.
pub fn brute_force_poly_identity(
    identity: Identity,
    n: usize,
    trials: usize,
    seed: u64,
) -> IdentityCheck {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let t = rng.gen_range(0.0..5.0);
        let (lhs, rhs) = identity_sides(identity, n, t);
        max_deviation = max_deviation.max(relative_deviation(&lhs, &rhs));
    }
    IdentityCheck {
        identity,
        n,
        trials: trials.max(1),
        max_deviation,
        passed: max_deviation < IDENTITY_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{DelayTerm, Equation};

    #[test]
    fn explicit_laguerre_matches_definition() {
        for &t in &[0.0, 0.5, 1.0, 2.5] {
            assert!((laguerre_explicit(1, t) - (1.0 - t)).abs() < 1e-15);
            assert!((laguerre_explicit(2, t) - 0.5 * (t * t - 4.0 * t + 2.0)).abs() < 1e-14);
            let l3 = (-t.powi(3) + 9.0 * t * t - 18.0 * t + 6.0) / 6.0;
            assert!((laguerre_explicit(3, t) - l3).abs() < 1e-14);
            assert!((laguerre_derivative_explicit(2, t) - (t - 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn common_divisors() {
        assert_eq!(common_divisor(&[2.0, 0.5]), Some(0.5));
        assert_eq!(common_divisor(&[0.5]), Some(0.5));
        assert_eq!(common_divisor(&[1.0, 0.75]), Some(0.25));
        assert_eq!(common_divisor(&[1.0, std::f64::consts::PI]), None);
    }

    #[test]
    fn step_validation() {
        let p = DdeProblem::new(vec![Equation::new(0.0)], History::constant(&[1.0]), 1.0).unwrap();
        assert_eq!(
            rk4_method_of_steps(&p, p.history(), 0.0),
            Err(ReferenceError::InvalidStep(0.0))
        );
        assert!(matches!(
            rk4_method_of_steps(&p, &History::constant(&[1.0, 2.0]), 0.1),
            Err(ReferenceError::HistoryMismatch { .. })
        ));
    }

    #[test]
    fn constant_solution_stays_constant() {
        let p = DdeProblem::new(
            vec![Equation::new(0.0).phi(3.0)],
            History::constant(&[3.0]),
            2.0,
        )
        .unwrap();
        let tr = rk4_method_of_steps(&p, p.history(), 0.1).unwrap();
        assert!(tr.values.iter().all(|v| v[0] == 3.0));
        assert_eq!(tr.end(), 2.0);
    }

    #[test]
    fn linear_delay_first_interval() {
        // u' = u(t-2), history 1: u = 1 + t on [0, 2].
        let p = DdeProblem::new(
            vec![Equation::new(0.0)
                .delay(DelayTerm::linear(0, 1.0, 2.0))
                .phi(1.0)],
            History::constant(&[1.0]),
            2.0,
        )
        .unwrap();
        let tr = rk4_method_of_steps(&p, p.history(), 0.1).unwrap();
        for (t, v) in tr.times().iter().zip(&tr.values) {
            assert!((v[0] - (1.0 + t)).abs() < 1e-10);
        }
        assert!(tr.is_aligned());
    }

    #[test]
    fn step_is_aligned_to_delays() {
        let p = DdeProblem::new(
            vec![Equation::new(0.0)
                .delay(DelayTerm::linear(0, 1.0, 0.3))
                .phi(1.0)],
            History::constant(&[1.0]),
            1.0,
        )
        .unwrap();
        let tr = rk4_method_of_steps(&p, p.history(), 0.07).unwrap();
        let per_delay = 0.3 / tr.step();
        assert!((per_delay - per_delay.round()).abs() < 1e-9);
        assert!(tr.step() <= 0.07);
    }

    #[test]
    fn out_of_range_query() {
        let p = DdeProblem::new(vec![Equation::new(0.0)], History::constant(&[1.0]), 1.0).unwrap();
        let tr = rk4_method_of_steps(&p, p.history(), 0.5).unwrap();
        assert!(matches!(
            tr.value(0, 1.5),
            Err(ReferenceError::OutOfRange { .. })
        ));
        assert!(matches!(
            tr.value(3, 0.5),
            Err(ReferenceError::UnknownEquation(3))
        ));
    }

    #[test]
    fn csv_export() {
        let p = DdeProblem::new(
            vec![Equation::new(0.0).phi(1.0)],
            History::constant(&[1.0]),
            1.0,
        )
        .unwrap();
        let tr = rk4_method_of_steps(&p, p.history(), 0.5).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,u_1"));
        assert_eq!(
            lines.next(),
            Some("0.0000000000000000e0,1.0000000000000000e0")
        );
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn identity_examples() {
        let c = brute_force_poly_identity(Identity::LaguerreChange, 5, 100, 1);
        assert!(c.passed && c.max_deviation < 1e-10, "{c:?}");
        assert!(brute_force_poly_identity(Identity::Shift { tau: 2.0 }, 5, 100, 2).passed);
        assert!(
            !brute_force_poly_identity(Identity::LiteralDelayProduct { tau: 1.0 }, 3, 20, 3).passed
        );
    }
}
