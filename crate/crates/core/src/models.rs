//! Ready-made problems used by the tests, examples and CLI defaults.

use crate::problem::{
    scalar_fn, DdeProblem, DelayTerm, Equation, History, ProblemError, Transform,
};

/// Wazewska-Czyzewska and Lasota red blood cell model
///
/// ```text
/// u'(t) = −γ·u(t) + β·exp(−ρ·u(t − τ)),   t > τ,
/// u(t)  = sin(t),                          0 ≤ t ≤ τ.
/// ```
pub fn blood_cell_model(
    gamma: f64,
    beta: f64,
    rho: f64,
    tau: f64,
    b: f64,
) -> Result<DdeProblem, ProblemError> {
    let transform = Transform::with_derivative(
        scalar_fn(move |u| (-rho * u).exp()),
        scalar_fn(move |u| -rho * (-rho * u).exp()),
    );
    DdeProblem::new(
        vec![Equation::new(gamma)
            .delay(DelayTerm::nonlinear(0, beta, tau, transform))
            .phi(tau.sin())],
        History::new(vec![scalar_fn(f64::sin)], 0.0, tau)?,
        b,
    )
}

/// The model with `γ = 0.4`, `β = ρ = 1`, `τ = 0.5`.
pub fn blood_cell_reference(b: f64) -> Result<DdeProblem, ProblemError> {
    blood_cell_model(0.4, 1.0, 1.0, 0.5, b)
}

/// Two coupled delay equations with unit history on `t ≤ 0`:
///
/// ```text
/// u_1'(t) = u_1(t − 2),
/// u_2'(t) = u_1(t − 2) + u_2(t − 0.5).
/// ```
pub fn coupled_delay_system(b: f64) -> Result<DdeProblem, ProblemError> {
    DdeProblem::new(
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
        b,
    )
}
