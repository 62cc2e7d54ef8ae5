use causal_rdf_web::{analytic_point, rd_curve, simulate_cascade, MAX_POINTS};

#[test]
fn analytic_point_reference_values() {
    let v = analytic_point(0.55, 0.45, 0.2).unwrap();
    let expected = [0.951015531660693, 0.451790633608815, 0.829166666666667, 0.3025, 0.162397350610939];
    for (a, b) in v.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{v:?}");
    }
    assert!(analytic_point(0.55, 0.45, 0.5).unwrap_err().contains("singular"));
}

#[test]
fn curve_tracks_closed_form() {
    let v = rd_curve(0.55, 0.45, 12).unwrap();
    assert_eq!(v.len(), 36);
    for t in v.chunks(3) {
        assert!((t[1] - t[2]).abs() < 1e-6, "{t:?}");
    }
    assert_eq!(v[v.len() - 2], 0.0);
    assert!(rd_curve(0.55, 0.45, 0).is_err());
    assert!(rd_curve(0.55, 0.45, MAX_POINTS + 1).is_err());
}

#[test]
fn simulation_summary() {
    let v = simulate_cascade(0.55, 0.45, 0.2, 200_000, 7).unwrap();
    assert!((v[0] - 0.2).abs() < 1e-8);
    assert!((v[1] - v[0]).abs() < 4.0 * v[2], "{v:?}");
    assert!((v[3] - 0.829166666666667).abs() < 1e-8);
    assert_eq!(v, simulate_cascade(0.55, 0.45, 0.2, 200_000, 7).unwrap());
    assert!(simulate_cascade(0.55, 0.45, 0.2, 0, 7).is_err());
    assert!(simulate_cascade(1.5, 0.45, 0.2, 10, 7).is_err());
}
