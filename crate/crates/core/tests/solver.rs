use proptest::prelude::*;

use rqlab::functionals::{i_alpha, r_alpha, AlphaParams};
use rqlab::grid::random_function;
use rqlab::properties::changes_sign;
use rqlab::solver::{descend, find_degenerate, genus_upper_bound, minimize_ground_state, multistart_spectrum, Restriction};
use rqlab::transforms::are_distinct;
use rqlab::{validate, Domain, Error, Execution, ExponentTriple, SolveOptions};

fn unit(cells: usize) -> Domain {
    Domain::interval(0.0, 1.0, cells).unwrap()
}

fn triple(p: f64, q: f64, r: f64) -> ExponentTriple {
    validate(p, q, r, 1).unwrap()
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let ap = AlphaParams::new(triple(2.0, 1.0, 3.0), 0.3);
    let opts = SolveOptions { seed: 42, ..SolveOptions::for_p(2.0) };
    let a = minimize_ground_state(&ap, &unit(120), &opts, None).unwrap();
    let b = minimize_ground_state(&ap, &unit(120), &opts, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn result_lies_on_the_normalization_manifold() {
    for (t, alpha) in [(triple(2.0, 1.0, 3.0), 0.7), (triple(3.0, 1.0, 2.0), 0.4), (triple(2.0, 2.5, 4.0), 3.0)] {
        let ap = AlphaParams::new(t, alpha);
        let res = minimize_ground_state(&ap, &unit(150), &SolveOptions::for_p(t.p), None).unwrap();
        assert!(res.converged);
        assert!((i_alpha(&res.point.u, &ap).unwrap() - 1.0).abs() < 1e-10);
        let r = r_alpha(&res.point.u, &ap).unwrap();
        assert!((r - res.point.lambda).abs() <= 1e-12 * r);
    }
}

#[test]
fn history_decreases_up_to_rounding() {
    let ap = AlphaParams::new(triple(1.5, 1.2, 2.5), 0.5);
    let res = minimize_ground_state(&ap, &unit(100), &SolveOptions::for_p(1.5), None).unwrap();
    assert!(res.converged);
    assert_eq!(res.history.len(), res.iterations + 1);
    for w in res.history.windows(2) {
        assert!(w[1].value <= w[0].value * (1.0 + 1e-12), "{} -> {}", w[0].value, w[1].value);
    }
}

#[test]
fn ground_states_are_positive_and_multistart_finds_one() {
    let ap = AlphaParams::new(triple(2.0, 1.0, 3.0), 0.5);
    let opts = SolveOptions { multistart: 4, ..SolveOptions::for_p(2.0) };
    let runs = multistart_spectrum(&ap, &unit(100), &opts).unwrap();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].point.u.values().iter().all(|&v| v > 1e-12));
    assert!(!changes_sign(&runs[0].point.u));
}

#[test]
fn parallel_and_sequential_multistart_agree() {
    let ap = AlphaParams::new(triple(3.0, 1.0, 2.0), 0.5);
    let base = SolveOptions { multistart: 6, positivity: false, ..SolveOptions::for_p(3.0) };
    let par = multistart_spectrum(&ap, &unit(100), &SolveOptions { execution: Execution::Parallel, ..base }).unwrap();
    let seq = multistart_spectrum(&ap, &unit(100), &SolveOptions { execution: Execution::Sequential, ..base }).unwrap();
    assert_eq!(par, seq);
    assert!(par.len() >= 2);
    for w in par.windows(2) {
        assert!(w[0].point.lambda <= w[1].point.lambda);
        assert!(are_distinct(&w[0].point.u, &w[1].point.u, &ap).unwrap());
    }
}

#[test]
fn odd_restriction_keeps_iterates_odd() {
    let d = unit(100);
    let ap = AlphaParams::new(triple(2.0, 2.0, 3.0), 1.0);
    let res = descend(&ap, &random_function(&d, 5), &SolveOptions::for_p(2.0), Restriction::Odd).unwrap();
    assert!(res.converged);
    let u = res.point.u.values();
    for i in 0..u.len() {
        assert!((u[i] + u[d.reflect_x(i)]).abs() < 1e-12);
    }
    // second Dirichlet eigenvalue (2 pi)^2 on the discrete grid
    let h = 0.01;
    let exact = 4.0 / (h * h) * (std::f64::consts::PI * h).sin().powi(2);
    assert!((res.point.lambda - exact).abs() < 1e-8 * exact);
}

#[test]
fn warm_start_on_another_grid_is_rejected() {
    let ap = AlphaParams::new(triple(2.0, 1.0, 3.0), 0.5);
    let w = random_function(&unit(50), 1);
    let err = minimize_ground_state(&ap, &unit(60), &SolveOptions::default(), Some(&w)).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn below_alpha0_is_never_reported_converged() {
    let t = triple(2.0, 1.0, 3.0);
    let ap = AlphaParams::new(t, t.alpha0() - 0.5);
    let opts = SolveOptions { max_iter: 50, ..SolveOptions::for_p(2.0) };
    let res = minimize_ground_state(&ap, &unit(80), &opts, None).unwrap();
    assert!(res.below_alpha0);
    assert!(!res.converged);
}

#[test]
fn genus_bounds_increase_with_k() {
    let d = unit(120);
    let opts = SolveOptions::for_p(2.0);
    for (t, alpha) in [(triple(2.0, 1.0, 3.0), 0.5), (triple(2.0, 2.5, 4.0), 2.0)] {
        let ap = AlphaParams::new(t, alpha);
        let l1 = minimize_ground_state(&ap, &d, &opts, None).unwrap().point.lambda;
        let b: Vec<f64> = (1..=4).map(|k| genus_upper_bound(k, &ap, &d, 1.0 / k as f64, &opts).unwrap()).collect();
        assert!(b[0] >= l1 * (1.0 - 1e-10));
        assert!(b.windows(2).all(|w| w[1] >= w[0]), "{b:?}");
    }
}

#[test]
fn genus_bound_rejects_bumps_that_do_not_fit() {
    let ap = AlphaParams::new(triple(2.0, 1.0, 3.0), 0.5);
    let err = genus_upper_bound(3, &ap, &unit(60), 0.5, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn two_dimensional_ground_state() {
    let t = validate(2.0, 1.0, 3.0, 2).unwrap();
    let d = Domain::rectangle(0.0, 1.0, 0.0, 1.0, 24).unwrap();
    let ap = AlphaParams::new(t, 0.5);
    let res = minimize_ground_state(&ap, &d, &SolveOptions::for_p(2.0), None).unwrap();
    assert!(res.converged);
    // symmetric under both reflections
    let u = res.point.u.values();
    let n = 23;
    let worst = (0..u.len())
        .map(|k| {
            let (i, j) = (k % n, k / n);
            (u[k] - u[j * n + (n - 1 - i)]).abs().max((u[k] - u[i * n + j]).abs())
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6 * res.point.u.max_abs(), "{worst}");
}

#[test]
fn degenerate_points() {
    let d = unit(200);
    for (t, at) in [(triple(2.0, 1.0, 3.0), 0.5), (triple(2.0, 2.5, 4.0), 2.0 / 1.5)] {
        let rec = find_degenerate(&t, &d, &SolveOptions::for_p(2.0)).unwrap();
        assert!((rec.alpha - at).abs() < 1e-14);
        assert!(rec.fiber2.abs() <= 1e-5 * rec.grad_p.powf(2.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levels_increase_with_alpha(a in 0.0f64..0.9, gap in 0.02f64..0.5, seed in 0u64..1000) {
        let t = triple(2.0, 1.0, 3.0);
        let d = unit(60);
        let opts = SolveOptions { seed, ..SolveOptions::for_p(2.0) };
        let lo = minimize_ground_state(&AlphaParams::new(t, a), &d, &opts, None).unwrap();
        let hi = minimize_ground_state(&AlphaParams::new(t, a + gap), &d, &opts, None).unwrap();
        prop_assert!(lo.converged && hi.converged);
        // on the unit interval the weighted level is the level itself
        prop_assert!(hi.point.lambda > lo.point.lambda);
    }

    #[test]
    fn ground_level_does_not_depend_on_the_seed(seed in 0u64..10_000) {
        let t = triple(3.0, 1.0, 2.0);
        let ap = AlphaParams::new(t, 0.6);
        let d = unit(60);
        let a = minimize_ground_state(&ap, &d, &SolveOptions { seed, ..SolveOptions::for_p(3.0) }, None).unwrap();
        let b = minimize_ground_state(&ap, &d, &SolveOptions { seed: seed + 1, ..SolveOptions::for_p(3.0) }, None).unwrap();
        prop_assert!((a.point.lambda - b.point.lambda).abs() < 1e-9 * a.point.lambda);
    }
}
