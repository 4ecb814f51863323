//! Laguerre and Hermite polynomials and the structural matrices built on them.
//!
//! With `X(t) = [1 t … t^N]` and `L(t) = [L_0(t) … L_N(t)]` the collocation
//! scheme rests on four row-vector identities:
//!
//! * `L(t) = X(t)·H` (monomial to Laguerre change of basis),
//! * `X'(t) = X(t)·B` (monomial differentiation),
//! * `L'(t) = L(t)·C` (Laguerre differentiation),
//! * `[1 (t−τ) … (t−τ)^N] = X(t)·T(τ)`, hence `L(t−τ) = X(t)·T(τ)·H`.
//!
//! The same layout is used for the Hermite variant, whose change-of-basis
//! matrix holds the monomial coefficients of `H_n` and whose derivative
//! matrix follows `H_n' = 2n·H_{n−1}`.

use thiserror::Error;

use crate::linalg::DenseMatrix;

/// Smallest truncation accepted by the solver.
pub const MIN_TRUNCATION: usize = 2;
/// Largest truncation; beyond this the binomial/factorial scaling of the
/// basis matrices is no longer meaningful in double precision.
pub const MAX_TRUNCATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("truncation N = {0} is below the minimum of {MIN_TRUNCATION}")]
    TruncationTooSmall(usize),
    #[error("truncation N = {0} exceeds the maximum of {MAX_TRUNCATION}")]
    TruncationTooLarge(usize),
    #[error("delay must be non-negative, got {0}")]
    NegativeDelay(f64),
    #[error("argument must be finite, got {0}")]
    NonFiniteArgument(f64),
    #[error("Laguerre basis rows are only defined for t >= 0, got {0}")]
    NegativeArgument(f64),
    #[error("generalized Laguerre parameter must exceed -1, got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Laguerre,
    Hermite,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Laguerre => "laguerre",
            BasisKind::Hermite => "hermite",
        }
    }
}

/// A polynomial family truncated at degree `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolynomialBasis {
    kind: BasisKind,
    truncation: usize,
}

impl PolynomialBasis {
    pub fn new(kind: BasisKind, truncation: usize) -> Result<Self, BasisError> {
        check_truncation(truncation)?;
        Ok(PolynomialBasis { kind, truncation })
    }

    pub fn laguerre(truncation: usize) -> Result<Self, BasisError> {
        Self::new(BasisKind::Laguerre, truncation)
    }

    pub fn hermite(truncation: usize) -> Result<Self, BasisError> {
        Self::new(BasisKind::Hermite, truncation)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Number of basis functions, `N + 1`.
    pub fn len(&self) -> usize {
        self.truncation + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Writes `[P_0(t) … P_N(t)]` into `out` without argument checks.
    pub(crate) fn fill_row(&self, t: f64, out: &mut [f64]) {
        match self.kind {
            BasisKind::Laguerre => laguerre_row_into(t, out),
            BasisKind::Hermite => hermite_row_into(t, out),
        }
    }

    pub(crate) fn row_unchecked(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.fill_row(t, &mut out);
        out
    }

    /// Monomial coefficients of each basis polynomial, one per column.
    pub fn change_of_basis(&self) -> DenseMatrix {
        match self.kind {
            BasisKind::Laguerre => laguerre_change_matrix(self.truncation),
            BasisKind::Hermite => hermite_monomial_matrix(self.truncation),
        }
    }

    /// The matrix `D` with `[P_0' … P_N'] = [P_0 … P_N]·D`.
    pub fn derivative_matrix(&self) -> DenseMatrix {
        match self.kind {
            BasisKind::Laguerre => laguerre_derivative_matrix(self.truncation),
            BasisKind::Hermite => hermite_derivative_matrix(self.truncation),
        }
    }
}

fn check_truncation(n: usize) -> Result<(), BasisError> {
    if n < MIN_TRUNCATION {
        Err(BasisError::TruncationTooSmall(n))
    } else if n > MAX_TRUNCATION {
        Err(BasisError::TruncationTooLarge(n))
    } else {
        Ok(())
    }
}

fn check_finite(t: f64) -> Result<(), BasisError> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(BasisError::NonFiniteArgument(t))
    }
}

fn laguerre_row_into(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 - t;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0 - t) * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

fn hermite_row_into(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 2.0 * t;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = 2.0 * t * out[n] - 2.0 * n as f64 * out[n - 1];
    }
}

/// `L_n(t)` by the three-term recurrence
/// `(n+1)·L_{n+1} = (2n+1−t)·L_n − n·L_{n−1}`.
pub fn laguerre_eval(n: usize, t: f64) -> Result<f64, BasisError> {
    check_finite(t)?;
    let mut row = vec![0.0; n + 1];
    laguerre_row_into(t, &mut row);
    Ok(row[n])
}

/// Generalized Laguerre polynomial `L_n^(α)(t)`.
pub fn generalized_laguerre_eval(n: usize, alpha: f64, t: f64) -> Result<f64, BasisError> {
    check_finite(t)?;
    if !alpha.is_finite() || alpha <= -1.0 {
        return Err(BasisError::InvalidAlpha(alpha));
    }
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 + alpha - t;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - t) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Physicists' Hermite polynomial `H_n(t)`.
pub fn hermite_eval(n: usize, t: f64) -> Result<f64, BasisError> {
    check_finite(t)?;
    let mut row = vec![0.0; n + 1];
    hermite_row_into(t, &mut row);
    Ok(row[n])
}

/// `X(t) = [1 t … t^N]`.
pub fn monomial_row(n: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut p = 1.0;
    for _ in 0..=n {
        out.push(p);
        p *= t;
    }
    out
}

/// `[P_0(t) … P_N(t)]` for the given basis.
pub fn basis_row(basis: &PolynomialBasis, t: f64) -> Result<Vec<f64>, BasisError> {
    check_finite(t)?;
    if basis.kind == BasisKind::Laguerre && t < 0.0 {
        return Err(BasisError::NegativeArgument(t));
    }
    Ok(basis.row_unchecked(t))
}

/// Pascal's triangle in floating point, `table[n][k] = C(n, k)`.
fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        table[i][0] = 1.0;
        for k in 1..=i {
            table[i][k] = table[i - 1][k - 1] + if k < i { table[i - 1][k] } else { 0.0 };
        }
    }
    table
}

/// `H[k][n] = (−1)^k / k! · C(n, k)` for `k ≤ n`.
pub fn laguerre_change_matrix(n: usize) -> DenseMatrix {
    let binom = binomials(n);
    let mut h = DenseMatrix::zeros(n + 1, n + 1);
    let mut scale = 1.0;
    for k in 0..=n {
        if k > 0 {
            scale *= -1.0 / k as f64;
        }
        for col in k..=n {
            h[(k, col)] = scale * binom[col][k];
        }
    }
    h
}

/// `B[k][k+1] = k + 1`.
pub fn monomial_derivative_matrix(n: usize) -> DenseMatrix {
    let mut b = DenseMatrix::zeros(n + 1, n + 1);
    for k in 0..n {
        b[(k, k + 1)] = (k + 1) as f64;
    }
    b
}

/// `C[p][q] = −1` for `p < q`, zero otherwise.
pub fn laguerre_derivative_matrix(n: usize) -> DenseMatrix {
    let mut c = DenseMatrix::zeros(n + 1, n + 1);
    for p in 0..=n {
        for q in p + 1..=n {
            c[(p, q)] = -1.0;
        }
    }
    c
}

/// `T[k][n] = C(n, k)·(−τ)^{n−k}` for `k ≤ n`.
pub fn shift_matrix(n: usize, tau: f64) -> DenseMatrix {
    let binom = binomials(n);
    let mut t = DenseMatrix::zeros(n + 1, n + 1);
    for col in 0..=n {
        let mut power = 1.0;
        for k in (0..=col).rev() {
            t[(k, col)] = binom[col][k] * power;
            power *= -tau;
        }
    }
    t
}

/// Monomial coefficients of `H_0 … H_N`, one polynomial per column.
pub fn hermite_monomial_matrix(n: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = 1.0;
    if n >= 1 {
        m[(1, 1)] = 2.0;
    }
    for j in 1..n {
        for k in 0..=j + 1 {
            let from_shift = if k > 0 { 2.0 * m[(k - 1, j)] } else { 0.0 };
            let from_prev = 2.0 * j as f64 * m[(k, j - 1)];
            m[(k, j + 1)] = from_shift - from_prev;
        }
    }
    m
}

fn hermite_derivative_matrix(n: usize) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(n + 1, n + 1);
    for k in 0..n {
        d[(k, k + 1)] = 2.0 * (k + 1) as f64;
    }
    d
}

/// Differentiation matrix of the Hermite basis.
pub fn hermite_diff_matrix(n: usize) -> Result<DenseMatrix, BasisError> {
    check_truncation(n)?;
    Ok(hermite_derivative_matrix(n))
}

/// The four structural matrices for one truncation and one delay.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrices {
    basis: PolynomialBasis,
    tau: f64,
    /// `H`: monomial coefficients of each basis polynomial.
    pub change: DenseMatrix,
    /// `B`: differentiation in the monomial basis.
    pub monomial_derivative: DenseMatrix,
    /// `C`: differentiation in the polynomial basis.
    pub derivative: DenseMatrix,
    /// `T(τ)`: monomial shift `t → t − τ`.
    pub shift: DenseMatrix,
}

impl BasisMatrices {
    pub fn new(basis: PolynomialBasis, tau: f64) -> Result<Self, BasisError> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(BasisError::NegativeDelay(tau));
        }
        let n = basis.truncation();
        Ok(BasisMatrices {
            basis,
            tau,
            change: basis.change_of_basis(),
            monomial_derivative: monomial_derivative_matrix(n),
            derivative: basis.derivative_matrix(),
            shift: shift_matrix(n, tau),
        })
    }

    pub fn basis(&self) -> PolynomialBasis {
        self.basis
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `T(τ)·H`, so that `X(t)·T(τ)·H = P(t − τ)`.
    pub fn delayed_change(&self) -> DenseMatrix {
        &self.shift * &self.change
    }
}

/// Laguerre `H`, `B`, `C` and `T(τ)` for truncation `n`.
pub fn build_basis_matrices(n: usize, tau: f64) -> Result<BasisMatrices, BasisError> {
    BasisMatrices::new(PolynomialBasis::laguerre(n)?, tau)
}
