//! Problem definition for systems of retarded delay equations
//!
//! ```text
//! u_l'(t) = −γ_l·u_l(t) + Σ_k β_k·f_k(u_{j_k}(t − τ_k)) + g_l(t),   0 ≤ t ≤ b
//! ```
//!
//! where `f_k` is the identity for linear delay terms. Values of `u` before
//! the end of the history interval come from the prescribed history.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest number of coupled equations accepted.
pub const MAX_EQUATIONS: usize = 3;

/// A thread-safe real function of one real argument.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn scalar_fn<F>(f: F) -> ScalarFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

pub fn constant_fn(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("at least one equation is required")]
    NoEquations,
    #[error("at most {MAX_EQUATIONS} equations are supported, got {0}")]
    TooManyEquations(usize),
    #[error("interval end b must be positive and finite, got {0}")]
    InvalidEndpoint(f64),
    #[error("equation {equation}: delay tau must be non-negative and finite, got {tau}")]
    InvalidDelay { equation: usize, tau: f64 },
    #[error("equation {equation}: delay term refers to unknown equation {source_eq}")]
    UnknownSource { equation: usize, source_eq: usize },
    #[error("equation {equation}: {field} must be finite")]
    NonFiniteCoefficient {
        equation: usize,
        field: &'static str,
    },
    #[error("history needs one function per equation: expected {expected}, got {found}")]
    HistoryCount { expected: usize, found: usize },
    #[error("history interval [{start}, {end}] must satisfy start <= end and end >= 0")]
    InvalidHistoryInterval { start: f64, end: f64 },
    #[error("history end {end} must lie before the interval end {b}")]
    HistoryBeyondEnd { end: f64, b: f64 },
    #[error("{what} of equation {equation} is not finite at t = {t}")]
    NonFinite {
        what: &'static str,
        equation: usize,
        t: f64,
    },
    #[error("history of equation {equation} requested at t = {t}, before its validity interval")]
    BeforeHistory { equation: usize, t: f64 },
}

/// A transform `f` applied to a delayed value, with an optional exact
/// derivative. Without one, the derivative is taken by central differences.
#[derive(Clone)]
pub struct Transform {
    value: ScalarFn,
    derivative: Option<ScalarFn>,
}

impl Transform {
    pub fn new(value: ScalarFn) -> Self {
        Transform {
            value,
            derivative: None,
        }
    }

    pub fn with_derivative(value: ScalarFn, derivative: ScalarFn) -> Self {
        Transform {
            value,
            derivative: Some(derivative),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.value)(u)
    }

    pub fn slope(&self, u: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(u),
            None => {
                let h = 1e-6 * u.abs().max(1.0);
                (self.eval(u + h) - self.eval(u - h)) / (2.0 * h)
            }
        }
    }
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("exact_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// One delayed contribution `β·f(u_source(t − τ))` to an equation.
#[derive(Debug, Clone)]
pub struct DelayTerm {
    /// Zero-based index of the equation whose delayed value enters.
    pub source: usize,
    pub beta: f64,
    pub tau: f64,
    pub transform: Option<Transform>,
}

impl DelayTerm {
    pub fn linear(source: usize, beta: f64, tau: f64) -> Self {
        DelayTerm {
            source,
            beta,
            tau,
            transform: None,
        }
    }

    pub fn nonlinear(source: usize, beta: f64, tau: f64, transform: Transform) -> Self {
        DelayTerm {
            source,
            beta,
            tau,
            transform: Some(transform),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.transform.is_none()
    }
}

#[derive(Clone)]
pub struct Equation {
    pub gamma: f64,
    pub delays: Vec<DelayTerm>,
    pub forcing: ScalarFn,
    /// Value imposed at the start time (0 unless the history reaches past 0).
    pub phi: f64,
}

impl Equation {
    pub fn new(gamma: f64) -> Self {
        Equation {
            gamma,
            delays: Vec::new(),
            forcing: constant_fn(0.0),
            phi: 0.0,
        }
    }

    pub fn delay(mut self, term: DelayTerm) -> Self {
        self.delays.push(term);
        self
    }

    pub fn forcing(mut self, g: ScalarFn) -> Self {
        self.forcing = g;
        self
    }

    pub fn phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }
}

impl fmt::Debug for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Equation")
            .field("gamma", &self.gamma)
            .field("delays", &self.delays)
            .field("phi", &self.phi)
            .finish_non_exhaustive()
    }
}

/// Prescribed values of every equation on a validity interval `[start, end]`.
///
/// A delayed argument `s` is served by the history when `s < end`; at and
/// after `end` the solution itself is used. When `end > 0` the solution is
/// prescribed on `[0, end]` and the equations hold only after `end`.
#[derive(Clone)]
pub struct History {
    funcs: Vec<ScalarFn>,
    start: f64,
    end: f64,
}

impl History {
    pub fn new(funcs: Vec<ScalarFn>, start: f64, end: f64) -> Result<Self, ProblemError> {
        if start.is_nan() || end.is_nan() || start > end || !end.is_finite() || end < 0.0 {
            return Err(ProblemError::InvalidHistoryInterval { start, end });
        }
        Ok(History { funcs, start, end })
    }

    /// Constant history on `t ≤ 0`.
    pub fn constant(values: &[f64]) -> Self {
        History {
            funcs: values.iter().map(|&v| constant_fn(v)).collect(),
            start: f64::NEG_INFINITY,
            end: 0.0,
        }
    }

    /// History on `t ≤ 0` given by arbitrary functions.
    pub fn before_zero(funcs: Vec<ScalarFn>) -> Self {
        History {
            funcs,
            start: f64::NEG_INFINITY,
            end: 0.0,
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    fn seam_tolerance(&self) -> f64 {
        1e-12 * self.end.abs().max(1.0)
    }

    /// Whether a delayed argument `s` is taken from the history.
    pub fn covers(&self, s: f64) -> bool {
        s < self.end - self.seam_tolerance()
    }

    /// Whether `t` lies in the part of `[0, b]` where the solution is
    /// prescribed rather than computed.
    pub fn prescribes(&self, t: f64) -> bool {
        self.end > 0.0 && t < self.end - self.seam_tolerance()
    }

    pub fn value(&self, equation: usize, t: f64) -> Result<f64, ProblemError> {
        if t < self.start - self.seam_tolerance() {
            return Err(ProblemError::BeforeHistory { equation, t });
        }
        let v = (self.funcs[equation])(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ProblemError::NonFinite {
                what: "history",
                equation,
                t,
            })
        }
    }

    pub fn function(&self, equation: usize) -> &ScalarFn {
        &self.funcs[equation]
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("History")
            .field("equations", &self.funcs.len())
            .field("start", &self.start)
            .field("end", &self.end)
            .finish()
    }
}

/// A validated system of retarded delay equations on `[0, b]`.
#[derive(Debug, Clone)]
pub struct DdeProblem {
    equations: Vec<Equation>,
    history: History,
    b: f64,
}

impl DdeProblem {
    pub fn new(equations: Vec<Equation>, history: History, b: f64) -> Result<Self, ProblemError> {
        let l = equations.len();
        if l == 0 {
            return Err(ProblemError::NoEquations);
        }
        if l > MAX_EQUATIONS {
            return Err(ProblemError::TooManyEquations(l));
        }
        if !b.is_finite() || b <= 0.0 {
            return Err(ProblemError::InvalidEndpoint(b));
        }
        if history.len() != l {
            return Err(ProblemError::HistoryCount {
                expected: l,
                found: history.len(),
            });
        }
        if history.end() >= b {
            return Err(ProblemError::HistoryBeyondEnd {
                end: history.end(),
                b,
            });
        }
        for (i, eq) in equations.iter().enumerate() {
            if !eq.gamma.is_finite() {
                return Err(ProblemError::NonFiniteCoefficient {
                    equation: i,
                    field: "gamma",
                });
            }
            if !eq.phi.is_finite() {
                return Err(ProblemError::NonFiniteCoefficient {
                    equation: i,
                    field: "phi",
                });
            }
            for d in &eq.delays {
                if !d.tau.is_finite() || d.tau < 0.0 {
                    return Err(ProblemError::InvalidDelay {
                        equation: i,
                        tau: d.tau,
                    });
                }
                if d.source >= l {
                    return Err(ProblemError::UnknownSource {
                        equation: i,
                        source_eq: d.source,
                    });
                }
                if !d.beta.is_finite() {
                    return Err(ProblemError::NonFiniteCoefficient {
                        equation: i,
                        field: "beta",
                    });
                }
            }
        }
        Ok(DdeProblem {
            equations,
            history,
            b,
        })
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn equation(&self, i: usize) -> &Equation {
        &self.equations[i]
    }

    /// Number of equations `l`.
    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn endpoint(&self) -> f64 {
        self.b
    }

    /// First time at which the equations are enforced.
    pub fn start_time(&self) -> f64 {
        self.history.end().max(0.0)
    }

    pub fn is_linear(&self) -> bool {
        self.equations
            .iter()
            .all(|e| e.delays.iter().all(DelayTerm::is_linear))
    }

    /// All delays appearing in the system.
    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.equations
            .iter()
            .flat_map(|e| e.delays.iter().map(|d| d.tau))
    }

    pub fn forcing(&self, equation: usize, t: f64) -> Result<f64, ProblemError> {
        let v = (self.equations[equation].forcing)(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ProblemError::NonFinite {
                what: "forcing",
                equation,
                t,
            })
        }
    }

    /// Same equations over a different interval end.
    pub fn with_endpoint(&self, b: f64) -> Result<Self, ProblemError> {
        DdeProblem::new(self.equations.clone(), self.history.clone(), b)
    }
}
