//! # rfde
//!
//! Laguerre matrix-collocation for retarded delay differential equations
//!
//! ```text
//! u_l'(t) = −γ·u_l(t) + β·u_j(t − τ) + g_l(t),   0 ≤ t ≤ b,
//! ```
//!
//! with prescribed history. The solution is sought as a truncated series
//! `u_{l,N}(t) = Σ a_{l,n}·L_n(t)` whose coefficients come from a single
//! dense linear system (or a short sequence of them when a delay term is
//! nonlinear).
//!
//! ## Modules
//!
//! - [`basis`]: Laguerre/Hermite evaluation and the `H`, `B`, `C`, `T` matrices
//! - [`linalg`]: dense matrices and Gaussian elimination
//! - [`problem`]: problem definition and history handling
//! - [`collocation`]: system assembly and the linear/nonlinear solvers
//! - [`accuracy`]: residuals, error norms, convergence studies
//! - [`reference`]: RK4 method-of-steps oracle and identity checks
//! - [`models`]: ready-made problems
//!
//! ## Example
//!
//! ```
//! use rfde::collocation::solve_linear;
//! use rfde::models::coupled_delay_system;
//!
//! let problem = coupled_delay_system(2.0).unwrap();
//! let solution = solve_linear(&problem, 4).unwrap();
//! // u_1(t) = 1 + t on [0, 2].
//! assert!((solution.value(0, 1.5) - 2.5).abs() < 1e-8);
//! ```

pub mod accuracy;
pub mod basis;
pub mod collocation;
pub mod linalg;
pub mod models;
pub mod problem;
pub mod reference;

pub use accuracy::{error_norms, residual, ErrorNorms, Reference};
pub use basis::{BasisKind, PolynomialBasis};
pub use collocation::{
    solve, solve_linear, solve_nonlinear, NonlinearOptions, NonlinearScheme, SolveError,
    SolveOptions, SpectralSolution,
};
pub use problem::{DdeProblem, DelayTerm, Equation, History, Transform};
pub use reference::{rk4_method_of_steps, Trajectory};
