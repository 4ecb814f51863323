//! Config-driven experiments for the `rfde` collocation solver.
//!
//! Problems are described in TOML (see [`config`]) with forcing, history
//! and nonlinearity written in the grammar of [`expr`]. The [`run`] module
//! turns a configuration into CSV tables.

pub mod config;
pub mod expr;
pub mod run;

pub use config::{load_config, parse_config, serialize, ConfigError, LoadedConfig, ProblemConfig};
pub use run::{run_compare, run_converge, run_solve, run_validate, Overrides, RunError, RunReport};
