use cogmac_wasm::{aloha_sweep_impl, csma_policy_impl, detection_radius_impl};

#[test]
fn aloha_sweep_peaks_inside_the_range() {
    let r = aloha_sweep_impl(10, 0.5, 0.4, 80, 1).unwrap();
    assert_eq!(r.m.len(), 80);
    assert!(r.normalized.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(r.best_m > 1 && r.best_m < 80, "{}", r.best_m);
    assert!((r.symmetric_m - 24.5).abs() < 0.5);
}

#[test]
fn csma_policy_optimum_is_no_worse() {
    for s in [1, 3] {
        let r = csma_policy_impl(8, s, 0.8, 6, 2).unwrap();
        assert!(r.optimal_fraction + 1e-12 >= r.heuristic_fraction);
        assert!((r.optimal_coverage.iter().sum::<f64>() - s as f64).abs() < 1e-9);
        assert!(r.loss_percentage.unwrap() >= -1e-9);
    }
    assert!(csma_policy_impl(8, 1, 0.8, 1, 2).is_err());
}

#[test]
fn detection_radius_grows_with_population() {
    let r = detection_radius_impl(5, 0.15, 0.3, 0.2, 1.0 / 2.25, 1.0, 60, 0).unwrap();
    assert!(r.radius.windows(2).all(|w| w[1] >= w[0] - 1e-6));
    assert!(r.radius.iter().all(|&x| x <= r.max_radius));
    assert_eq!(r.radius[0], 0.0);
    assert!(*r.radius.last().unwrap() > 0.0);
}

#[test]
fn json_wrappers_serialize() {
    let s = cogmac_wasm::aloha_sweep(4, 0.2, 0.5, 5, 0).ok().unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["m"].as_array().unwrap().len(), 5);
}
