//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p rfde-validation --test acceptance`. The process exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rfde::accuracy::{error_norms, sample_points};
use rfde::collocation::{solve_linear, solve_nonlinear};
use rfde::models::{blood_cell_reference, coupled_delay_system};
use rfde::problem::{DdeProblem, Equation, History};
use rfde::reference::{
    brute_force_poly_identity, identity_sides, relative_deviation, rk4_method_of_steps, Identity,
};
use rfde_cli::run::{run_converge, run_solve, CONVERGENCE_COLUMNS, IDENTITY_SUITE};
use rfde_cli::{load_config, Overrides};
use rfde_validation::{manufactured_problem, max_over, poly, unit_history_delay_solution};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn identity_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for identity in IDENTITY_SUITE {
        for n in 2..=10 {
            let c = brute_force_poly_identity(identity, n, 100, 42 + n as u64);
            worst = worst.max(c.max_deviation);
            if c.max_deviation >= 1e-9 {
                failed.push(format!("{} N={n}", identity.label()));
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!("worst deviation {worst:.2e} < 1e-9; failures: {failed:?}"),
    )
}

fn polynomial_exactness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let b = 2.0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(4..=8);
        let degree = rng.gen_range(0..n);
        let c: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gamma = rng.gen_range(-2.0..2.0);
        let beta = rng.gen_range(-2.0..2.0);
        let tau = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let p = manufactured_problem(&c, gamma, beta, tau, b).expect("valid manufactured problem");
        let sol = match solve_linear(&p, n) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("solve failed: {e}")),
        };
        let pts = sample_points(0.0, b, 20);
        let scale = max_over(&pts, |t| poly(&c, t).abs()).max(1.0);
        let err = max_over(&pts, |t| (sol.value(0, t) - poly(&c, t)).abs()) / scale;
        worst = worst.max(err);
    }
    outcome(
        worst < 1e-8,
        format!("worst scaled L∞ error over 50 problems {worst:.2e} < 1e-8"),
    )
}

fn coupled_agreement() -> Vec<(String, Outcome)> {
    let p = coupled_delay_system(5.0).expect("valid problem");
    let pts = sample_points(0.0, 2.0, 10);
    let err = |n: usize| {
        solve_linear(&p, n).map(|s| max_over(&pts, |t| (s.value(0, t) - (1.0 + t)).abs()))
    };
    let (e4, e8) = match (err(4), err(8)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            let o = outcome(false, format!("solve failed: {a:?} {b:?}"));
            return vec![("3a".into(), o)];
        }
    };
    let rk_pts = sample_points(0.0, 4.0, 50);
    let rk =
        rk4_method_of_steps(&p.with_endpoint(4.0).expect("valid"), p.history(), 1e-2).map(|tr| {
            max_over(&rk_pts, |t| {
                (tr.value(0, t).unwrap_or(f64::NAN) - unit_history_delay_solution(t)).abs()
            })
        });
    let rk_detail = match &rk {
        Ok(e) => format!("RK4 method of steps vs piecewise solution on [0,4]: {e:.2e} < 1e-9"),
        Err(e) => format!("RK4 failed: {e}"),
    };
    vec![
        (
            "3a".into(),
            outcome(
                e4 < 5e-2,
                format!("N=4 u_1 vs 1+t on [0,2]: L∞ {e4:.3e} < 5e-2"),
            ),
        ),
        (
            "3b".into(),
            outcome(e8 < e4, format!("N=8 error {e8:.3e} < N=4 error {e4:.3e}")),
        ),
        (
            "3c".into(),
            outcome(matches!(rk, Ok(e) if e < 1e-9), rk_detail),
        ),
    ]
}

fn blood_cell_loop() -> Outcome {
    let p = blood_cell_reference(5.0).expect("valid problem");
    let nl = match solve_nonlinear(&p, 10, 1e-8, 50) {
        Ok(nl) => nl,
        Err(e) => return outcome(false, format!("no convergence: {e}")),
    };
    let tr = match rk4_method_of_steps(&p, p.history(), 1e-3) {
        Ok(tr) => tr,
        Err(e) => return outcome(false, format!("oracle failed: {e}")),
    };
    let pts = sample_points(0.5, 3.0, 100);
    let d = max_over(&pts, |t| {
        (nl.solution.value(0, t) - tr.value(0, t).unwrap_or(f64::NAN)).abs()
    });
    outcome(
        nl.iterations <= 50 && d < 1e-2,
        format!(
            "converged in {} iterations; L∞ vs RK4(1e-3) on [0.5,3]: {d:.3e} < 1e-2",
            nl.iterations
        ),
    )
}

fn norm_algebra() -> Outcome {
    let mut rng = StdRng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut ordered = true;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=100);
        let e: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let n = error_norms(&e).expect("non-empty");
        ordered &= n.linf <= n.l2;
        let lhs = n.l2 * n.l2;
        let rhs = len as f64 * n.rms * n.rms;
        worst = worst.max((lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE));
    }
    outcome(
        ordered && worst <= 1e-12,
        format!("linf <= l2 on all vectors: {ordered}; worst |l2² - count·rms²|/l2² {worst:.2e}"),
    )
}

fn rk4_order() -> Outcome {
    let gamma = 0.8;
    let p = DdeProblem::new(
        vec![Equation::new(gamma).phi(1.0)],
        History::constant(&[1.0]),
        2.0,
    )
    .expect("valid problem");
    let err = |h: f64| {
        rk4_method_of_steps(&p, p.history(), h)
            .and_then(|tr| tr.value(0, 2.0))
            .map(|v| (v - (-gamma * 2.0f64).exp()).abs())
    };
    match (err(0.1), err(0.05)) {
        (Ok(a), Ok(b)) => {
            let ratio = a / b;
            outcome(
                (12.0..=20.0).contains(&ratio),
                format!("error ratio under halving {ratio:.3} in [12, 20]"),
            )
        }
        (a, b) => outcome(false, format!("integration failed: {a:?} {b:?}")),
    }
}

fn structural_reproduction() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/coupled.toml");
    let mut loaded = match load_config(&root) {
        Ok(l) => l,
        Err(e) => return outcome(false, format!("config: {e}")),
    };
    loaded.config.solver.timing_repeats = 300;
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("tempdir: {e}")),
    };
    let overrides = Overrides {
        n_list: Some(vec![3, 4]),
        ..Overrides::default()
    };
    let conv = match run_converge(&loaded, &overrides, dir.path(), None) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("converge: {e}")),
    };
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap_or_default();
    let header_ok = table
        .lines()
        .find(|l| !l.starts_with('#'))
        .is_some_and(|h| h == CONVERGENCE_COLUMNS);
    let rows_ok = conv.records.len() == 2 && conv.records.iter().all(|r| r.norms.len() == 2);
    let solve = match run_solve(&loaded, &overrides, dir.path(), None) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("solve: {e}")),
    };
    let (t3, t4) = (solve.records[0].cpu_time, solve.records[1].cpu_time);
    outcome(
        header_ok && rows_ok && t4 > t3 && t4 < 10.0 * t3,
        format!(
            "columns [{CONVERGENCE_COLUMNS}] present: {header_ok}; cpu_time N=3 {t3:.3e}s, \
             N=4 {t4:.3e}s (need t3 < t4 < 10·t3)"
        ),
    )
}

fn literal_product_discrepancy() -> Outcome {
    let (lhs, rhs) = identity_sides(Identity::LiteralDelayProduct { tau: 1.0 }, 3, 1.0);
    let d = relative_deviation(&lhs, &rhs);
    outcome(
        d > 1e-3,
        format!("X·T·B·H vs L(t-τ) at N=3, τ=1, t=1 differ by {d:.3e} > 1e-3"),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Vec<(String, Outcome)>;
    let criteria: Vec<(&str, f64, Check)> = vec![
        ("1 matrix identities", 1.0, || {
            vec![("1".into(), identity_suite())]
        }),
        ("2 polynomial exactness", 5.0, || {
            vec![("2".into(), polynomial_exactness())]
        }),
        ("3 coupled system vs oracle", 2.0, coupled_agreement),
        ("4 nonlinear loop vs RK4", 10.0, || {
            vec![("4".into(), blood_cell_loop())]
        }),
        ("5 error-norm algebra", 1.0, || {
            vec![("5".into(), norm_algebra())]
        }),
        ("6 RK4 order", 1.0, || vec![("6".into(), rk4_order())]),
        ("7 structural reproduction", 5.0, || {
            vec![("7".into(), structural_reproduction())]
        }),
        ("8 literal delay product", 1.0, || {
            vec![("8".into(), literal_product_discrepancy())]
        }),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let parts = check();
        let elapsed = start.elapsed().as_secs_f64();
        let in_budget = elapsed < budget;
        for (id, o) in parts {
            let ok = o.passed && in_budget;
            if !ok {
                failures += 1;
            }
            println!(
                "{} [{id}] {name}: {} ({elapsed:.3}s, budget {budget}s)",
                if ok { "PASS" } else { "FAIL" },
                o.detail
            );
        }
    }
    if failures == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance checks failed");
        ExitCode::FAILURE
    }
}
