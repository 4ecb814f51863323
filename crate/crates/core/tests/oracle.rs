use rfde::accuracy::sample_points;
use rfde::collocation::{solve_linear, solve_nonlinear};
use rfde::models::{blood_cell_reference, coupled_delay_system};
use rfde::problem::{DdeProblem, Equation, History};
use rfde::reference::rk4_method_of_steps;

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

/// Piecewise solution of `u' = u(t-2)` with unit history.
fn u1_exact(t: f64) -> f64 {
    let mut sum = 1.0;
    let mut j = 1;
    while t > 2.0 * (j - 1) as f64 {
        sum += (t - 2.0 * (j - 1) as f64).powi(j as i32) / factorial(j);
        j += 1;
    }
    sum
}

#[test]
fn method_of_steps_matches_piecewise_solution() {
    let p = coupled_delay_system(4.0).unwrap();
    let tr = rk4_method_of_steps(&p, p.history(), 1e-2).unwrap();
    assert!(tr.is_aligned());
    for &t in &sample_points(0.0, 4.0, 50) {
        let e = (tr.value(0, t).unwrap() - u1_exact(t)).abs();
        assert!(e < 1e-9, "t={t} e={e:e}");
    }
}

#[test]
fn rk4_has_fourth_order() {
    let gamma = 0.7;
    let p = DdeProblem::new(
        vec![Equation::new(gamma).phi(1.0)],
        History::constant(&[1.0]),
        2.0,
    )
    .unwrap();
    let err = |h: f64| {
        let tr = rk4_method_of_steps(&p, p.history(), h).unwrap();
        (tr.value(0, 2.0).unwrap() - (-gamma * 2.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn coupled_system_first_piece() {
    let p = coupled_delay_system(2.0).unwrap();
    let sol = solve_linear(&p, 4).unwrap();
    for &t in &sample_points(0.0, 2.0, 10) {
        assert!((sol.value(0, t) - (1.0 + t)).abs() < 1e-8);
    }
}

#[test]
fn coupled_system_full_interval_is_close() {
    let p = coupled_delay_system(5.0).unwrap();
    let sol = solve_linear(&p, 4).unwrap();
    let e = sample_points(0.0, 2.0, 10)
        .iter()
        .map(|&t| (sol.value(0, t) - (1.0 + t)).abs())
        .fold(0.0, f64::max);
    assert!(e < 5e-2, "e={e}");
}

#[test]
fn blood_cell_model_agrees_with_oracle() {
    let p = blood_cell_reference(5.0).unwrap();
    let nl = solve_nonlinear(&p, 10, 1e-8, 50).unwrap();
    assert!(nl.iterations <= 50);
    let tr = rk4_method_of_steps(&p, p.history(), 1e-3).unwrap();
    let d = sample_points(0.5, 3.0, 100)
        .iter()
        .map(|&t| (nl.solution.value(0, t) - tr.value(0, t).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-2, "d={d}");
}
