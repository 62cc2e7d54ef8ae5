use approx::assert_abs_diff_eq;
use causal_rdf::history::history_index;
use causal_rdf::oracle::{brute_force_rdf, OracleSettings};
use causal_rdf::prob::binary_entropy;
use causal_rdf::solver::{
    d_max, d_max_exact, evaluate_policy, solve_fixed_point, solve_for_target_distortion,
    sweep_curve, sweep_curve_threaded, OutputMarginalFamily, SolverConfig,
};
use causal_rdf::{DistortionSpec, Error, MarkovSource};
use proptest::prelude::*;
use std::collections::HashMap;

fn reference() -> (MarkovSource, DistortionSpec) {
    (
        MarkovSource::binary(0.55, 0.45).unwrap(),
        DistortionSpec::consecutive_ones(),
    )
}

/// Entropy in bits of the zero-cost reconstruction sequence over stages
/// `0..=n`, by enumerating source sequences.
fn best_sequence_entropy(src: &MarkovSource, n: usize) -> f64 {
    let mut mass: HashMap<Vec<usize>, f64> = HashMap::new();
    for idx in 0..(1usize << (n + 1)) {
        let xs: Vec<usize> = (0..=n).map(|i| (idx >> (n - i)) & 1).collect();
        let mut p = 1.0;
        let mut prev = None;
        for &x in &xs {
            p *= src.step_prob(prev, x);
            prev = Some(x);
        }
        let zs: Vec<usize> = (0..=n)
            .map(|i| usize::from(xs[i] == 1 && i > 0 && xs[i - 1] == 1))
            .collect();
        *mass.entry(zs).or_insert(0.0) += p;
    }
    -mass.values().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

#[test]
fn stationary_zero_distortion_rate() {
    let (src, dist) = reference();
    let sol = solve_for_target_distortion(&src, &dist, &SolverConfig::stationary(0.0), 0.0).unwrap();
    assert_abs_diff_eq!(sol.point.rate, binary_entropy(0.3025).unwrap(), epsilon = 1e-6);
}

#[test]
fn exact_zero_distortion_rate_is_block_entropy() {
    let (src, dist) = reference();
    for n in 1..=3 {
        let sol = solve_for_target_distortion(&src, &dist, &SolverConfig::exact(n, 0.0), 0.0).unwrap();
        let expected = best_sequence_entropy(&src, n) / (n + 1) as f64;
        assert_abs_diff_eq!(sol.point.rate, expected, epsilon = 1e-6);
        assert!(sol.point.distortion < 1e-9);
    }
}

#[test]
fn exact_matches_brute_force_at_three_stages() {
    let (src, dist) = reference();
    let target = 0.5 * d_max_exact(&src, &dist, 3).unwrap();
    let solver = solve_for_target_distortion(&src, &dist, &SolverConfig::exact(3, 0.0), target).unwrap();
    let oracle = brute_force_rdf(&src, &dist, target, 3, &OracleSettings::default()).unwrap();
    assert_abs_diff_eq!(solver.point.rate, oracle.rate, epsilon = 1e-4);
}

#[test]
fn threaded_sweep_matches_serial() {
    let (src, dist) = reference();
    let grid: Vec<f64> = (0..12).map(|k| -0.25 * k as f64).collect();
    let cfg = SolverConfig::exact(2, 0.0);
    let serial = sweep_curve(&src, &dist, &cfg, &grid).unwrap();
    let threaded = sweep_curve_threaded(&src, &dist, &cfg, &grid, 3).unwrap();
    assert_eq!(serial, threaded);
}

#[test]
fn exact_policies_are_indexed_by_history() {
    let (src, dist) = reference();
    let sol = solve_fixed_point(&src, &dist, &SolverConfig::exact(2, -1.5)).unwrap();
    let OutputMarginalFamily::Exact(_) = &sol.marginals else {
        panic!("exact solve returned stationary marginals");
    };
    let xs = [1, 0, 1];
    let ys = [0, 1];
    let stage = &sol.policy.kernels()[2];
    let row = history_index(&ys, 2) * 8 + history_index(&xs, 2);
    assert_eq!(sol.policy.row(&xs, &ys), stage.row(row));
}

#[test]
fn bad_inputs_are_rejected() {
    let (src, dist) = reference();
    assert!(solve_fixed_point(&src, &dist, &SolverConfig::stationary(0.5)).is_err());
    assert!(solve_fixed_point(&src, &dist, &SolverConfig::stationary(f64::NAN)).is_err());
    assert!(matches!(
        solve_for_target_distortion(&src, &dist, &SolverConfig::stationary(0.0), -0.1),
        Err(Error::InvalidArgument(_))
    ));
    let floored = DistortionSpec::windowed(2, 2, 0, 0, vec![vec![0.1, 1.1], vec![1.1, 0.1]]).unwrap();
    for cfg in [SolverConfig::stationary(0.0), SolverConfig::exact(2, 0.0)] {
        assert!(matches!(
            solve_for_target_distortion(&src, &floored, &cfg, 0.05),
            Err(Error::Infeasible { .. })
        ));
    }
    let ternary = DistortionSpec::hamming(3).unwrap();
    assert!(solve_fixed_point(&src, &ternary, &SolverConfig::stationary(-1.0)).is_err());
}

#[test]
fn hamming_on_ternary_source() {
    let src = MarkovSource::new(
        causal_rdf::prob::Alphabet::new(3).unwrap(),
        causal_rdf::Distribution::uniform(3).unwrap(),
        causal_rdf::StochasticKernel::new(vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap(),
    )
    .unwrap();
    let dist = DistortionSpec::hamming(3).unwrap();
    assert_abs_diff_eq!(d_max(&src, &dist).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    let sol = solve_fixed_point(&src, &dist, &SolverConfig::exact(2, -2.0)).unwrap();
    assert!(sol.point.converged);
    assert_abs_diff_eq!(sol.closed_form_rate, sol.point.rate, epsilon = 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stationary_fixed_point_invariants(p in 0.05f64..0.95, q in 0.05f64..0.95, s in -8.0f64..-0.05) {
        let src = MarkovSource::binary(p, q).unwrap();
        let dist = DistortionSpec::consecutive_ones();
        let sol = solve_fixed_point(&src, &dist, &SolverConfig::stationary(s)).unwrap();
        prop_assert!(sol.policy.max_row_error() < 1e-12);
        prop_assert!(sol.point.rate >= -1e-12);
        prop_assert!(sol.point.distortion <= d_max(&src, &dist).unwrap() + 1e-9);
        prop_assert_eq!(sol.g.max_abs(), 0.0);
        if sol.point.converged {
            prop_assert!((sol.closed_form_rate - sol.point.rate).abs() < 1e-8);
        }
        let eval = evaluate_policy(&src, &dist, &sol.policy).unwrap();
        prop_assert!((eval.rate - sol.point.rate).abs() < 1e-12);
    }

    #[test]
    fn exact_fixed_point_invariants(p in 0.05f64..0.95, q in 0.05f64..0.95, s in -6.0f64..-0.05, n in 1usize..4) {
        let src = MarkovSource::binary(p, q).unwrap();
        let dist = DistortionSpec::consecutive_ones();
        let sol = solve_fixed_point(&src, &dist, &SolverConfig::exact(n, s)).unwrap();
        prop_assert!(sol.policy.max_row_error() < 1e-12);
        prop_assert!(sol.g.last_stage().iter().all(|&v| v == 0.0));
        prop_assert_eq!(sol.g.stages().len(), n + 1);
        prop_assert!(sol.point.rate >= -1e-12);
        if sol.point.converged {
            prop_assert!((sol.closed_form_rate - sol.point.rate).abs() < 1e-8);
        }
    }

    #[test]
    fn curve_is_monotone_in_slope(p in 0.1f64..0.9, q in 0.1f64..0.9) {
        let src = MarkovSource::binary(p, q).unwrap();
        let dist = DistortionSpec::consecutive_ones();
        let grid: Vec<f64> = (1..16).map(|k| -0.4 * k as f64).collect();
        let pts = sweep_curve(&src, &dist, &SolverConfig::stationary(0.0), &grid).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].distortion <= w[0].distortion + 1e-9);
            prop_assert!(w[1].rate >= w[0].rate - 1e-9);
        }
    }
}
