use proptest::prelude::*;
use rfde::accuracy::{convergence_study, error_norms, Reference, StudyOptions};
use rfde::problem::{scalar_fn, DdeProblem, Equation, History};

proptest! {
    #[test]
    fn norm_algebra(e in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let n = error_norms(&e).unwrap();
        prop_assert!(n.linf <= n.l2 * (1.0 + 1e-15));
        let lhs = n.l2 * n.l2;
        let rhs = e.len() as f64 * n.rms * n.rms;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(f64::MIN_POSITIVE));
        prop_assert!(n.rms <= n.linf * (1.0 + 1e-15));
    }
}

#[test]
fn exponential_decay_converges() {
    let p = DdeProblem::new(
        vec![Equation::new(1.0).phi(1.0)],
        History::constant(&[1.0]),
        2.0,
    )
    .unwrap();
    let reference = Reference::Exact(vec![scalar_fn(|t| (-t).exp())]);
    let rows = convergence_study(&p, &[4, 6, 8, 10], &reference, &StudyOptions::default()).unwrap();
    let linf: Vec<f64> = rows
        .iter()
        .map(|r| r.outcome.as_ref().unwrap().reports[0].norms.linf)
        .collect();
    for w in linf.windows(2) {
        assert!(w[1] < w[0], "{linf:?}");
    }
}
