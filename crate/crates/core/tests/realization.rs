use approx::assert_abs_diff_eq;
use causal_rdf::causality::{check_causality, check_sequence_kernel, SequenceKernel};
use causal_rdf::realization::{
    bayes_filter, bsc_realization, empirical_stats, identity_realization, simulate, verify_realization,
};
use causal_rdf::solver::{solve_fixed_point, solve_for_target_distortion, CausalPolicy, SolverConfig};
use causal_rdf::{DistortionSpec, Error, MarkovSource};

fn reference() -> (MarkovSource, DistortionSpec) {
    (
        MarkovSource::binary(0.55, 0.45).unwrap(),
        DistortionSpec::consecutive_ones(),
    )
}

fn target_policy(d: f64) -> CausalPolicy {
    let (src, dist) = reference();
    solve_for_target_distortion(&src, &dist, &SolverConfig::stationary(0.0), d)
        .unwrap()
        .solution
        .policy
}

/// `P(x_i | y^{i-1})` by enumerating every source sequence.
fn posterior_by_enumeration(src: &MarkovSource, policy: &CausalPolicy, ys: &[usize]) -> Vec<f64> {
    let i = ys.len();
    let mut post = [0.0; 2];
    for idx in 0..(1usize << (i + 1)) {
        let xs: Vec<usize> = (0..=i).map(|k| (idx >> (i - k)) & 1).collect();
        let mut w = 1.0;
        let mut prev = None;
        for &x in &xs {
            w *= src.step_prob(prev, x);
            prev = Some(x);
        }
        for j in 0..i {
            w *= policy.row(&xs[..=j], &ys[..j])[ys[j]];
        }
        post[xs[i]] += w;
    }
    let total: f64 = post.iter().sum();
    post.iter().map(|p| p / total).collect()
}

#[test]
fn filter_matches_enumeration() {
    let (src, _) = reference();
    let policy = target_policy(0.15);
    let spec = identity_realization(&policy).unwrap();
    for ys in [vec![], vec![1], vec![0, 1], vec![1, 1, 0], vec![0, 0, 1, 1]] {
        let filtered = bayes_filter(&src, &spec, &ys).unwrap();
        let expected = posterior_by_enumeration(&src, &policy, &ys);
        for (a, b) in filtered.probs().iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn filter_rejects_impossible_observations() {
    let src = MarkovSource::binary(0.5, 0.25).unwrap();
    let dist = DistortionSpec::consecutive_ones();
    let spec = bsc_realization(&src, &dist, 0.0).unwrap();
    // best symbol 1 needs x_{i-1} = 1, impossible at time 0
    assert!(matches!(
        bayes_filter(&src, &spec, &[1]),
        Err(Error::ImpossibleEvidence { step: 0 })
    ));
}

#[test]
fn identity_realization_of_exact_policy() {
    let (src, dist) = reference();
    let sol = solve_fixed_point(&src, &dist, &SolverConfig::exact(3, -2.0)).unwrap();
    let spec = identity_realization(&sol.policy).unwrap();
    let report = verify_realization(&src, &spec, &sol.policy, 3).unwrap();
    assert_eq!(report.max_deviation, 0.0);
    assert!(verify_realization(&src, &spec, &sol.policy, 4).is_err());
}

#[test]
fn simulation_is_reproducible() {
    let (src, dist) = reference();
    let spec = identity_realization(&target_policy(0.2)).unwrap();
    let a = simulate(&src, &spec, &dist, 500, 11).unwrap();
    let b = simulate(&src, &spec, &dist, 500, 11).unwrap();
    let c = simulate(&src, &spec, &dist, 500, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.y, c.y);
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,x,a,b,y,rho\n"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn empirical_transitions_follow_source() {
    let (src, dist) = reference();
    let spec = identity_realization(&target_policy(0.2)).unwrap();
    let trace = simulate(&src, &spec, &dist, 200_000, 3).unwrap();
    let stats = empirical_stats(&trace, &dist).unwrap();
    for u in 0..2 {
        let row = &stats.transition_counts[u];
        let total = (row[0] + row[1]) as f64;
        let p1 = row[1] as f64 / total;
        let se = (0.55 * 0.45 / total).sqrt();
        assert!((p1 - 0.55).abs() < 4.0 * se, "row {u}: {p1}");
    }
}

#[test]
fn causality_of_unrolled_and_anticausal_kernels() {
    let (src, _) = reference();
    let policy = target_policy(0.1);
    let report = check_causality(&src, &policy, 3).unwrap();
    assert!(report.passed, "{report:?}");
    let seq = SequenceKernel::from_policy(&policy, 3).unwrap();
    assert!(check_sequence_kernel(&src, &seq).unwrap().passed);
    let bad = check_sequence_kernel(&src, &SequenceKernel::anticausal_copy(1).unwrap()).unwrap();
    assert!(!bad.passed);
    assert!(bad.max_violation > 0.1);
}
