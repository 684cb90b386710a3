use isac_wasm_demo::{locate, pattern, trial_json};
use isac_privacy::harness::{run_trial_detail, TrialOptions};
use isac_wasm_demo::demo_config;

#[test]
fn trial_json_has_both_arms() {
    let v: serde_json::Value = serde_json::from_str(&trial_json(1, 35.0, 1).unwrap()).unwrap();
    assert_eq!(v["aps"].as_array().unwrap().len(), 6);
    for arm in ["baseline", "framework"] {
        assert_eq!(v[arm]["receivers"].as_array().unwrap().len(), 1);
        assert!(v[arm]["detected"].is_boolean());
    }
}

#[test]
fn bad_receiver_count_is_an_error() {
    assert!(trial_json(1, 35.0, 6).is_err());
}

#[test]
fn pattern_is_normalized_and_empty_for_receivers() {
    let cfg = demo_config(35.0, 2);
    let d = run_trial_detail(&cfg, 4, &TrialOptions::default()).unwrap();
    let tx = d.framework.r_final.transmitters[0];
    let p = pattern(&d, true, tx);
    assert_eq!(p.len(), 361);
    let peak = p.iter().cloned().fold(0.0, f64::max);
    assert!((peak - 1.0).abs() < 1e-12);
    assert!(p.iter().all(|&v| v >= -1e-12));
    let rx = d.framework.r_final.receivers[0];
    assert!(pattern(&d, true, rx).is_empty());
}

#[test]
fn exact_bearings_meet_at_the_target() {
    let target: (f64, f64) = (120.0, 340.0);
    let anchors: [f64; 6] = [0.0, 0.0, 500.0, 0.0, 250.0, 500.0];
    let bearings: Vec<f64> = anchors
        .chunks(2)
        .map(|a| (target.1 - a[1]).atan2(target.0 - a[0]))
        .collect();
    let q = locate(&anchors, &bearings).unwrap();
    assert!((q[0] - target.0).abs() < 1e-3 && (q[1] - target.1).abs() < 1e-3, "{q:?}");
}

#[test]
fn mismatched_inputs_are_rejected() {
    assert!(locate(&[0.0, 0.0, 1.0], &[0.0]).is_err());
    assert!(locate(&[0.0, 0.0], &[0.0]).is_err());
}
