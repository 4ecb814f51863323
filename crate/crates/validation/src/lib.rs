//! Closed-form references used by the acceptance suite.

use rfde::problem::{scalar_fn, DdeProblem, DelayTerm, Equation, History, ProblemError};

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

/// Solution of `u' = u(t − 2)` with unit history on `t ≤ 0`:
/// `1 + Σ_j (t − 2(j−1))^j / j!` over the pieces already entered.
pub fn unit_history_delay_solution(t: f64) -> f64 {
    let mut sum = 1.0;
    let mut j = 1;
    while t > 2.0 * (j - 1) as f64 {
        sum += (t - 2.0 * (j - 1) as f64).powi(j as i32) / factorial(j);
        j += 1;
    }
    sum
}

/// `Σ c_k t^k`.
pub fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

pub fn poly_derivative(c: &[f64], t: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, a)| acc * t + k as f64 * a)
}

/// `u' = −γu + βu(t − τ) + g` with `g` chosen so that the polynomial `c`
/// is the exact solution, including on the history `t ≤ 0`.
pub fn manufactured_problem(
    c: &[f64],
    gamma: f64,
    beta: f64,
    tau: f64,
    b: f64,
) -> Result<DdeProblem, ProblemError> {
    let (cg, ch) = (c.to_vec(), c.to_vec());
    let g = scalar_fn(move |t| {
        poly_derivative(&cg, t) + gamma * poly(&cg, t) - beta * poly(&cg, t - tau)
    });
    DdeProblem::new(
        vec![Equation::new(gamma)
            .delay(DelayTerm::linear(0, beta, tau))
            .forcing(g)
            .phi(c.first().copied().unwrap_or(0.0))],
        History::before_zero(vec![scalar_fn(move |t| poly(&ch, t))]),
        b,
    )
}

pub fn max_over<F: Fn(f64) -> f64>(points: &[f64], f: F) -> f64 {
    points.iter().map(|&t| f(t)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_solution() {
        assert_eq!(unit_history_delay_solution(0.0), 1.0);
        assert_eq!(unit_history_delay_solution(1.5), 2.5);
        assert!((unit_history_delay_solution(3.0) - 4.5).abs() < 1e-15);
        assert!((unit_history_delay_solution(5.0) - (6.0 + 4.5 + 1.0 / 6.0)).abs() < 1e-13);
    }

    #[test]
    fn polynomial_helpers() {
        let c = [1.0, -2.0, 3.0];
        assert_eq!(poly(&c, 2.0), 9.0);
        assert_eq!(poly_derivative(&c, 2.0), 10.0);
        assert_eq!(poly_derivative(&[4.0], 1.0), 0.0);
    }
}
