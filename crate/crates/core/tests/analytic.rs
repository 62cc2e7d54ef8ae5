use approx::assert_abs_diff_eq;
use causal_rdf::analytic::{
    analytic_dmax, analytic_kernel, analytic_rdf, on_special_case, special_case_q, BinaryExampleParams,
};
use causal_rdf::prob::binary_entropy;
use causal_rdf::solver::{evaluate_policy, solve_for_target_distortion, SolverConfig};
use causal_rdf::{DistortionSpec, MarkovSource};
use proptest::prelude::*;

fn h(p: f64) -> f64 {
    binary_entropy(p).unwrap()
}

#[test]
fn frozen_values_at_reference_point() {
    let params = BinaryExampleParams::new(0.55, 0.45, 0.2).unwrap();
    assert_abs_diff_eq!(params.pi0(), 0.6975, epsilon = 1e-15);
    assert_abs_diff_eq!(analytic_dmax(0.55, 0.45).unwrap(), 0.3025, epsilon = 1e-15);
    assert_abs_diff_eq!(analytic_rdf(&params).unwrap(), 0.162397350610939, epsilon = 1e-12);
    let k = analytic_kernel(&params).unwrap();
    assert_abs_diff_eq!(k.alpha, 0.951015531660693, epsilon = 1e-12);
    assert_abs_diff_eq!(k.beta, 0.451790633608815, epsilon = 1e-12);
    assert_abs_diff_eq!(k.gamma, 0.829166666666667, epsilon = 1e-12);
    assert!(k.valid);
}

#[test]
fn special_case_curve() {
    assert!(on_special_case(0.5, 0.25, 1e-12));
    assert!(!on_special_case(0.55, 0.45, 1e-3));
    let params = BinaryExampleParams::new(0.5, 0.25, 0.25).unwrap();
    assert_abs_diff_eq!(analytic_rdf(&params).unwrap(), 0.188721875540867, epsilon = 1e-12);
    let k = analytic_kernel(&params).unwrap();
    assert_abs_diff_eq!(k.alpha, 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(k.beta, 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(k.gamma, 0.5, epsilon = 1e-12);
}

#[test]
fn closed_form_kernel_attains_the_closed_form_rate() {
    let src = MarkovSource::binary(0.55, 0.45).unwrap();
    let dist = DistortionSpec::consecutive_ones();
    for d in [0.05, 0.1, 0.2, 0.28] {
        let params = BinaryExampleParams::new(0.55, 0.45, d).unwrap();
        let policy = analytic_kernel(&params).unwrap().policy().unwrap();
        let eval = evaluate_policy(&src, &dist, &policy).unwrap();
        assert_abs_diff_eq!(eval.distortion, d, epsilon = 1e-12);
        assert_abs_diff_eq!(eval.rate, analytic_rdf(&params).unwrap(), epsilon = 1e-10);
    }
}

#[test]
fn solver_agrees_with_closed_form_off_the_reference_point() {
    let dist = DistortionSpec::consecutive_ones();
    for (p, q) in [(0.3, 0.6), (0.7, 0.2), (0.4, 0.4)] {
        let src = MarkovSource::binary(p, q).unwrap();
        let dmax = analytic_dmax(p, q).unwrap();
        for frac in [0.2, 0.5, 0.8] {
            let d = frac * dmax;
            let sol = solve_for_target_distortion(&src, &dist, &SolverConfig::stationary(0.0), d).unwrap();
            let expected = analytic_rdf(&BinaryExampleParams::new(p, q, d).unwrap()).unwrap();
            assert_abs_diff_eq!(sol.point.rate, expected, epsilon = 1e-6);
            assert_abs_diff_eq!(sol.point.slope, (d / (1.0 - d)).ln(), epsilon = 1e-4);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn special_case_rate_is_one_minus_entropy(p in 0.05f64..0.95, d in 0.01f64..0.49) {
        let q = special_case_q(p).unwrap();
        let rate = analytic_rdf(&BinaryExampleParams::new(p, q, d).unwrap()).unwrap();
        prop_assert!((rate - (1.0 - h(d))).abs() < 1e-12);
    }

    #[test]
    fn closed_form_kernel_has_unit_distortion_target(p in 0.1f64..0.9, q in 0.1f64..0.9, frac in 0.05f64..0.95) {
        let d = frac * analytic_dmax(p, q).unwrap();
        let k = analytic_kernel(&BinaryExampleParams::new(p, q, d).unwrap()).unwrap();
        prop_assert!(k.valid);
        let src = MarkovSource::binary(p, q).unwrap();
        let eval = evaluate_policy(&src, &DistortionSpec::consecutive_ones(), &k.policy().unwrap()).unwrap();
        prop_assert!((eval.distortion - d).abs() < 1e-10);
    }
}
