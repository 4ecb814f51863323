use proptest::prelude::*;
use rfde::basis::{
    generalized_laguerre_eval, hermite_diff_matrix, hermite_eval, hermite_monomial_matrix,
    laguerre_eval, monomial_row,
};
use rfde::reference::{
    brute_force_poly_identity, identity_sides, laguerre_explicit, relative_deviation, Identity,
    IDENTITY_THRESHOLD,
};

const SUITE: [Identity; 5] = [
    Identity::LaguerreChange,
    Identity::MonomialDerivative,
    Identity::LaguerreDerivative,
    Identity::Shift { tau: 1.0 },
    Identity::DerivativeConsistency,
];

#[test]
fn suite_passes_for_moderate_truncations() {
    for identity in SUITE {
        for n in 2..=10 {
            let check = brute_force_poly_identity(identity, n, 100, 7 + n as u64);
            assert!(
                check.passed,
                "{} at N={n}: {:e}",
                identity.label(),
                check.max_deviation
            );
        }
    }
}

#[test]
fn shift_identity_for_several_delays() {
    for tau in [0.0, 0.5, 1.0, 2.0] {
        let check = brute_force_poly_identity(Identity::Shift { tau }, 8, 100, 3);
        assert!(check.passed, "tau={tau}: {:e}", check.max_deviation);
    }
}

#[test]
fn literal_delay_product_is_wrong() {
    let (lhs, rhs) = identity_sides(Identity::LiteralDelayProduct { tau: 1.0 }, 3, 1.0);
    assert!(relative_deviation(&lhs, &rhs) > 1e-3);
    let check = brute_force_poly_identity(Identity::LiteralDelayProduct { tau: 1.0 }, 3, 20, 1);
    assert!(!check.passed);
}

#[test]
fn hermite_relations() {
    // H_n(t) = Σ M[k][n] t^k and H_n' = 2n H_{n-1}.
    let n = 8;
    let m = hermite_monomial_matrix(n);
    let d = hermite_diff_matrix(n).unwrap();
    for &t in &[-1.3, 0.0, 0.4, 2.2] {
        let h = m.left_mul(&monomial_row(n, t));
        let dh = d.left_mul(&h);
        for k in 0..=n {
            let exact = hermite_eval(k, t).unwrap();
            assert!((h[k] - exact).abs() < 1e-9 * exact.abs().max(1.0));
            let slope = if k == 0 {
                0.0
            } else {
                2.0 * k as f64 * hermite_eval(k - 1, t).unwrap()
            };
            assert!((dh[k] - slope).abs() < 1e-9 * slope.abs().max(1.0));
        }
    }
}

proptest! {
    #[test]
    fn recurrence_matches_explicit_sum(n in 0usize..=15, t in 0.0f64..10.0) {
        let a = laguerre_eval(n, t).unwrap();
        let b = laguerre_explicit(n, t);
        prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }

    #[test]
    fn generalized_reduces_to_ordinary(n in 0usize..=12, t in 0.0f64..8.0) {
        let a = generalized_laguerre_eval(n, 0.0, t).unwrap();
        let b = laguerre_eval(n, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn every_identity_holds_at_random_points(n in 2usize..=10, seed in any::<u64>()) {
        for identity in SUITE {
            let check = brute_force_poly_identity(identity, n, 10, seed);
            prop_assert!(check.max_deviation < IDENTITY_THRESHOLD, "{}", identity.label());
        }
    }
}
