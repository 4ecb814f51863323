//! TOML problem definitions.
//!
//! ```toml
//! b = 5.0
//! history_interval = [0.0, 0.5]
//!
//! [constants]
//! rho = 1.0
//!
//! [solver]
//! n = 10
//!
//! [oracle]
//! step = 1e-3
//!
//! [[equation]]
//! gamma = 0.4
//! beta = 1.0
//! tau = 0.5
//! nonlinearity = "exp(-rho*u)"
//! history = "sin(t)"
//! ```
//!
//! Each `[[equation]]` takes either the `beta`/`tau`/`nonlinearity`
//! shorthand for a single self-delay, or any number of
//! `[[equation.delay]]` tables with a 1-based `source`.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use rfde::basis::BasisKind;
use rfde::collocation::{NonlinearOptions, NonlinearScheme, SolveOptions};
use rfde::problem::{
    constant_fn, DdeProblem, DelayTerm, Equation, History, ProblemError, ScalarFn, Transform,
};

use crate::expr::{Expr, ExprError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field} (line {line}, column {column}): {message}")]
    Expression {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Semantic { field: String, message: String },
    #[error("invalid problem: {0}")]
    Problem(#[from] ProblemError),
}

impl ConfigError {
    fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }

    /// The offending field, when the error names one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Expression { field, .. } | ConfigError::Semantic { field, .. } => {
                Some(field)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisName {
    Laguerre,
    Hermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Newton,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceName {
    Exact,
    Oracle,
    None,
}

/// A number or a constant expression such as `"sin(0.5)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    50
}

fn default_samples() -> usize {
    rfde::accuracy::DEFAULT_SAMPLES_PER_UNIT
}

fn default_repeats() -> usize {
    1
}

fn default_scheme() -> SchemeName {
    SchemeName::Newton
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "default_samples")]
    pub samples_per_unit: usize,
    #[serde(default = "default_repeats")]
    pub timing_repeats: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: None,
            n_list: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
            scheme: default_scheme(),
            samples_per_unit: default_samples(),
            timing_repeats: default_repeats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub kind: ReferenceName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    /// 1-based equation index; defaults to the enclosing equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    pub beta: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Spanned<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<Spanned<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Spanned<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Spanned<String>>,
    /// Defaults to the history value at the end of the history interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Spanned<String>>,
    #[serde(default, rename = "delay", skip_serializing_if = "Vec::is_empty")]
    pub delays: Vec<DelayConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisName>,
    /// `[start, end]`; defaults to `(-inf, 0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_interval: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(rename = "equation")]
    pub equations: Vec<EquationConfig>,
}

/// A validated configuration together with its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ProblemConfig,
    source: String,
}

/// The problem a configuration describes.
#[derive(Clone)]
pub struct BuiltProblem {
    pub problem: DdeProblem,
    /// Present when every equation has an `exact` expression.
    pub exact: Option<Vec<ScalarFn>>,
}

fn line_column(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let config: ProblemConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map_or((1, 1), |span: Range<usize>| line_column(text, span.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    let loaded = LoadedConfig {
        config,
        source: text.to_string(),
    };
    loaded.build()?;
    Ok(loaded)
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// TOML text that parses back to an equal configuration.
pub fn serialize(config: &ProblemConfig) -> String {
    toml::to_string(config).expect("configuration is always representable as TOML")
}

impl LoadedConfig {
    pub fn source(&self) -> &str {
        &self.source
    }

    fn expr(
        &self,
        field: String,
        spanned: &Spanned<String>,
        var: &'static str,
    ) -> Result<Expr, ConfigError> {
        Expr::parse(spanned.get_ref(), var, &self.config.constants).map_err(
            |ExprError { position, message }| {
                // Skip the opening quote of the TOML string.
                let (line, column) = line_column(&self.source, spanned.span().start + 1 + position);
                ConfigError::Expression {
                    field,
                    line,
                    column,
                    message,
                }
            },
        )
    }

    fn function(
        &self,
        field: String,
        spanned: &Spanned<String>,
        var: &'static str,
    ) -> Result<ScalarFn, ConfigError> {
        let e = self.expr(field, spanned, var)?;
        Ok(Arc::new(move |x| e.eval(x)))
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.config.solver;
        SolveOptions {
            basis: match self.config.basis {
                Some(BasisName::Hermite) => BasisKind::Hermite,
                _ => BasisKind::Laguerre,
            },
            nonlinear: NonlinearOptions {
                tol: s.tol,
                max_iter: s.max_iter,
                scheme: match s.scheme {
                    SchemeName::Newton => NonlinearScheme::Newton,
                    SchemeName::Picard => NonlinearScheme::Picard,
                },
            },
        }
    }

    pub fn build(&self) -> Result<BuiltProblem, ConfigError> {
        let c = &self.config;
        if !c.b.is_finite() || c.b <= 0.0 {
            return Err(ConfigError::semantic(
                "b",
                format!("must be positive, got {}", c.b),
            ));
        }
        if c.equations.is_empty() {
            return Err(ConfigError::semantic(
                "equation",
                "at least one equation is required",
            ));
        }
        for (name, v) in &c.constants {
            let ident = name.starts_with(|ch: char| ch.is_ascii_alphabetic() || ch == '_')
                && name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !ident || !v.is_finite() {
                return Err(ConfigError::semantic(
                    format!("constants.{name}"),
                    "constants need identifier names and finite values",
                ));
            }
        }
        self.check_solver()?;
        let (start, end) = match c.history_interval {
            None => (f64::NEG_INFINITY, 0.0),
            Some([a, b]) if a <= b && b >= 0.0 && b.is_finite() && b < c.b => (a, b),
            Some([a, b]) => {
                return Err(ConfigError::semantic(
                    "history_interval",
                    format!("[{a}, {b}] must satisfy start <= end, 0 <= end < b"),
                ))
            }
        };

        let mut histories = Vec::new();
        let mut equations = Vec::new();
        let mut exact = Vec::new();
        for (i, eq) in c.equations.iter().enumerate() {
            let field = |name: &str| format!("equation[{}].{name}", i + 1);
            if !eq.gamma.is_finite() {
                return Err(ConfigError::semantic(field("gamma"), "must be finite"));
            }
            let history = match &eq.history {
                Some(h) => Some(self.function(field("history"), h, "t")?),
                None => None,
            };
            let phi = match &eq.phi {
                Some(Scalar::Number(v)) => *v,
                Some(Scalar::Expr(text)) => {
                    let e = Expr::parse(text, "t", &c.constants)
                        .map_err(|e| ConfigError::semantic(field("phi"), e.to_string()))?;
                    if !e.is_constant() {
                        return Err(ConfigError::semantic(field("phi"), "must not depend on t"));
                    }
                    e.eval(0.0)
                }
                None => match &history {
                    Some(h) => h(end),
                    None => {
                        return Err(ConfigError::semantic(
                            field("phi"),
                            "either phi or history is required",
                        ))
                    }
                },
            };
            if !phi.is_finite() {
                return Err(ConfigError::semantic(field("phi"), "must be finite"));
            }
            histories.push(history.unwrap_or_else(|| constant_fn(phi)));

            let mut equation = Equation::new(eq.gamma).phi(phi);
            if let Some(g) = &eq.forcing {
                equation = equation.forcing(self.function(field("forcing"), g, "t")?);
            }
            match (eq.beta, eq.tau) {
                (Some(beta), Some(tau)) => {
                    let term = self.delay_term(
                        i,
                        beta,
                        tau,
                        eq.nonlinearity.as_ref(),
                        &field("tau"),
                        &field("nonlinearity"),
                    )?;
                    equation = equation.delay(term);
                }
                (None, None) if eq.nonlinearity.is_none() => {}
                (None, None) => {
                    return Err(ConfigError::semantic(
                        field("nonlinearity"),
                        "needs beta and tau",
                    ))
                }
                (Some(_), None) => {
                    return Err(ConfigError::semantic(
                        field("tau"),
                        "beta is given without tau",
                    ))
                }
                (None, Some(_)) => {
                    return Err(ConfigError::semantic(
                        field("beta"),
                        "tau is given without beta",
                    ))
                }
            }
            for (k, d) in eq.delays.iter().enumerate() {
                let dfield = |name: &str| format!("equation[{}].delay[{}].{name}", i + 1, k + 1);
                let source = match d.source {
                    None => i,
                    Some(s) if (1..=c.equations.len()).contains(&s) => s - 1,
                    Some(s) => {
                        return Err(ConfigError::semantic(
                            dfield("source"),
                            format!("{s} is not an equation index (1..={})", c.equations.len()),
                        ))
                    }
                };
                let term = self.delay_term(
                    source,
                    d.beta,
                    d.tau,
                    d.transform.as_ref(),
                    &dfield("tau"),
                    &dfield("transform"),
                )?;
                equation = equation.delay(term);
            }
            equations.push(equation);
            if let Some(x) = &eq.exact {
                exact.push(self.function(field("exact"), x, "t")?);
            }
        }

        let history = if start == f64::NEG_INFINITY && end == 0.0 {
            History::before_zero(histories)
        } else {
            History::new(histories, start, end)?
        };
        let problem = DdeProblem::new(equations, history, c.b)?;
        let exact = (exact.len() == c.equations.len()).then_some(exact);
        if self.reference_kind() == ReferenceName::Exact && exact.is_none() {
            return Err(ConfigError::semantic(
                "reference.kind",
                "exact reference needs an exact expression for every equation",
            ));
        }
        if self.reference_kind() == ReferenceName::Oracle && c.oracle.is_none() {
            return Err(ConfigError::semantic(
                "reference.kind",
                "oracle reference needs an [oracle] step",
            ));
        }
        if let Some(w) = c.reference.as_ref().and_then(|r| r.window) {
            if !(w[0] >= 0.0 && w[0] < w[1] && w[1] <= c.b) {
                return Err(ConfigError::semantic(
                    "reference.window",
                    format!("[{}, {}] is not inside [0, {}]", w[0], w[1], c.b),
                ));
            }
        }
        Ok(BuiltProblem { problem, exact })
    }

    fn delay_term(
        &self,
        source: usize,
        beta: f64,
        tau: f64,
        transform: Option<&Spanned<String>>,
        tau_field: &str,
        transform_field: &str,
    ) -> Result<DelayTerm, ConfigError> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(ConfigError::semantic(
                tau_field,
                format!("delay must be non-negative, got {tau}"),
            ));
        }
        if !beta.is_finite() {
            return Err(ConfigError::semantic(
                tau_field.replace("tau", "beta"),
                "must be finite",
            ));
        }
        Ok(match transform {
            Some(f) if f.get_ref().trim() != "u" => {
                let func = self.function(transform_field.to_string(), f, "u")?;
                DelayTerm::nonlinear(source, beta, tau, Transform::new(func))
            }
            _ => DelayTerm::linear(source, beta, tau),
        })
    }

    fn check_solver(&self) -> Result<(), ConfigError> {
        let s = &self.config.solver;
        let check_n = |field: &str, n: usize| {
            if (rfde::basis::MIN_TRUNCATION..=rfde::basis::MAX_TRUNCATION).contains(&n) {
                Ok(())
            } else {
                Err(ConfigError::semantic(
                    field,
                    format!(
                        "truncation {n} outside {}..={}",
                        rfde::basis::MIN_TRUNCATION,
                        rfde::basis::MAX_TRUNCATION
                    ),
                ))
            }
        };
        if let Some(n) = s.n {
            check_n("solver.n", n)?;
        }
        if let Some(list) = &s.n_list {
            if list.is_empty() {
                return Err(ConfigError::semantic("solver.n_list", "must not be empty"));
            }
            for &n in list {
                check_n("solver.n_list", n)?;
            }
        }
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(ConfigError::semantic("solver.tol", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(ConfigError::semantic(
                "solver.max_iter",
                "must be at least 1",
            ));
        }
        if s.samples_per_unit == 0 {
            return Err(ConfigError::semantic(
                "solver.samples_per_unit",
                "must be at least 1",
            ));
        }
        if s.timing_repeats == 0 {
            return Err(ConfigError::semantic(
                "solver.timing_repeats",
                "must be at least 1",
            ));
        }
        if let Some(o) = &self.config.oracle {
            if !(o.step > 0.0 && o.step.is_finite()) {
                return Err(ConfigError::semantic("oracle.step", "must be positive"));
            }
        }
        Ok(())
    }

    /// The configured reference, or the best one available: exact when every
    /// equation has an `exact` expression, then the oracle, then none.
    pub fn reference_kind(&self) -> ReferenceName {
        let c = &self.config;
        if let Some(r) = &c.reference {
            return r.kind;
        }
        if c.equations.iter().all(|e| e.exact.is_some()) {
            ReferenceName::Exact
        } else if c.oracle.is_some() {
            ReferenceName::Oracle
        } else {
            ReferenceName::None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLOOD_CELL: &str = r#"
b = 5.0
history_interval = [0.0, 0.5]

[constants]
rho = 1.0

[[equation]]
gamma = 0.4
beta = 1.0
tau = 0.5
nonlinearity = "exp(-rho*u)"
history = "sin(t)"
"#;

    #[test]
    fn blood_cell_config() {
        let loaded = parse_config(BLOOD_CELL).unwrap();
        let built = loaded.build().unwrap();
        let p = &built.problem;
        assert!(!p.is_linear());
        assert_eq!(p.equation(0).phi, 0.5f64.sin());
        assert_eq!(p.history().end(), 0.5);
        assert_eq!(p.equation(0).delays[0].tau, 0.5);
        let f = p.equation(0).delays[0].transform.as_ref().unwrap();
        assert!((f.eval(1.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(loaded.reference_kind(), ReferenceName::None);
    }

    #[test]
    fn forcing_expression() {
        let cfg = "b = 2\n[[equation]]\nphi = 0\nforcing = \"2*t+1\"\n";
        let p = parse_config(cfg).unwrap().build().unwrap().problem;
        assert_eq!(p.forcing(0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn negative_delay_names_tau() {
        let cfg = "b = 2\n[[equation]]\nphi = 1\nbeta = 1\ntau = -1\n";
        let err = parse_config(cfg).unwrap_err();
        assert!(err.field().unwrap().contains("tau"), "{err}");
    }

    #[test]
    fn unknown_key_has_location() {
        let cfg = "b = 2\n[[equation]]\nphi = 1\ngama = 1\n";
        match parse_config(cfg).unwrap_err() {
            ConfigError::Syntax { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("gama"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn expression_error_has_location() {
        let cfg = "b = 2\n[[equation]]\nphi = 1\nforcing = \"1 + x\"\n";
        match parse_config(cfg).unwrap_err() {
            ConfigError::Expression {
                field,
                line,
                column,
                ..
            } => {
                assert_eq!(field, "equation[1].forcing");
                assert_eq!((line, column), (4, 16));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn coupled_delays() {
        let cfg = r#"
b = 5
[[equation]]
phi = 1
[[equation.delay]]
beta = 1
tau = 2

[[equation]]
phi = 1
[[equation.delay]]
source = 1
beta = 1
tau = 2
[[equation.delay]]
beta = 1
tau = 0.5
"#;
        let p = parse_config(cfg).unwrap().build().unwrap().problem;
        assert_eq!(p.len(), 2);
        let d = &p.equation(1).delays;
        assert_eq!((d[0].source, d[1].source), (0, 1));
        assert!(p.is_linear());
        let bad = cfg.replace("source = 1", "source = 3");
        assert_eq!(
            parse_config(&bad).unwrap_err().field(),
            Some("equation[2].delay[1].source")
        );
    }

    #[test]
    fn round_trip() {
        let loaded = parse_config(BLOOD_CELL).unwrap();
        let text = serialize(&loaded.config);
        let again = parse_config(&text).unwrap();
        assert_eq!(loaded.config, again.config);
    }

    #[test]
    fn semantic_checks() {
        for (cfg, field) in [
            ("b = 0\n[[equation]]\nphi = 1\n", "b"),
            ("b = 1\nequation = []\n", "equation"),
            ("b = 1\n[[equation]]\n", "equation[1].phi"),
            ("b = 1\n[[equation]]\nphi = \"t\"\n", "equation[1].phi"),
            (
                "b = 1\n[[equation]]\nphi = 1\nbeta = 1\n",
                "equation[1].tau",
            ),
            (
                "b = 1\n[solver]\nn = 1\n[[equation]]\nphi = 1\n",
                "solver.n",
            ),
            (
                "b = 1\n[reference]\nkind = \"exact\"\n[[equation]]\nphi = 1\n",
                "reference.kind",
            ),
            (
                "b = 1\nhistory_interval = [0, 2]\n[[equation]]\nphi = 1\n",
                "history_interval",
            ),
        ] {
            let err = parse_config(cfg).unwrap_err();
            assert_eq!(err.field(), Some(field), "{cfg}: {err}");
        }
    }

    #[test]
    fn phi_expression() {
        let cfg = "b = 1\n[[equation]]\nphi = \"sin(0.5)\"\n";
        let p = parse_config(cfg).unwrap().build().unwrap().problem;
        assert_eq!(p.equation(0).phi, 0.5f64.sin());
    }
}
