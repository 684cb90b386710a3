//! Browser bindings. Results cross the boundary as JSON strings or flat
//! `f64` arrays so the page needs no glue beyond what wasm-bindgen emits.

use std::cell::RefCell;
use std::f64::consts::PI;

use isac_privacy::adversary::{beampattern, signal_covariance, triangulate, AttackResult, Line, ADVERSARY};
use isac_privacy::config::lin_to_db;
use isac_privacy::framework::FrameworkResult;
use isac_privacy::harness::{run_trial_detail, TrialDetail, TrialOptions};
use isac_privacy::scenario::Point;
use isac_privacy::signals::transmit_all;
use isac_privacy::{Profile, ScenarioConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

thread_local! {
    static LAST: RefCell<Option<TrialDetail>> = const { RefCell::new(None) };
}

/// Desk profile with the two knobs the page exposes.
pub fn demo_config(p_max_dbm: f64, n_rx: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::profile(Profile::Desk);
    cfg.p_max_dbm = p_max_dbm;
    cfg.n_rx = n_rx;
    cfg
}

fn xy(p: &Point) -> Value {
    json!([p.x, p.y])
}

fn arm(r: &FrameworkResult, a: &AttackResult) -> Value {
    json!({
        "receivers": r.r_final.receivers,
        "transmitters": r.r_final.transmitters,
        "sensing_sinr_db": lin_to_db(r.sensing_sinr),
        "iterations": r.iterations,
        "estimate": a.q_hat.as_ref().map(xy),
        "error_m": if a.error_m.is_finite() { json!(a.error_m) } else { Value::Null },
        "detected": a.detected,
        "bearings": a.per_ap.iter().map(|e| json!({
            "ap": e.ap,
            "true": e.true_angle,
            "estimated": e.estimated_angle,
        })).collect::<Vec<_>>(),
    })
}

/// Runs one paired trial and keeps it for `trial_beampattern`.
pub fn trial_json(seed: u64, p_max_dbm: f64, n_rx: usize) -> isac_privacy::Result<String> {
    let cfg = demo_config(p_max_dbm, n_rx);
    cfg.validate()?;
    let d = run_trial_detail(&cfg, seed, &TrialOptions::default())?;
    let out = json!({
        "side": cfg.grid_side,
        "r_gd": cfg.r_gd,
        "adversary": ADVERSARY,
        "aps": d.scenario.ap_positions.iter().map(xy).collect::<Vec<_>>(),
        "ues": d.scenario.ue_positions.iter().map(xy).collect::<Vec<_>>(),
        "target": xy(&d.scenario.target),
        "baseline": arm(&d.baseline, &d.attack_baseline),
        "framework": arm(&d.framework, &d.attack_framework),
    });
    LAST.with(|l| *l.borrow_mut() = Some(d));
    Ok(out.to_string())
}

/// Normalized transmit beampattern of `ap` in the last trial, over
/// `-180..=180` degrees in 1 degree steps. Empty when `ap` was a receiver.
pub fn pattern(detail: &TrialDetail, framework: bool, ap: usize) -> Vec<f64> {
    let r = if framework { &detail.framework } else { &detail.baseline };
    let Some(b) = r.w_final.transmitters.iter().position(|&t| t == ap) else {
        return Vec::new();
    };
    let x = &transmit_all(&r.w_final, &detail.frame)[b];
    let grid: Vec<f64> = (0..=360).map(|d| (d as f64 - 180.0) * PI / 180.0).collect();
    let p = beampattern(&signal_covariance(x), &grid);
    let peak = p.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        p.iter().map(|v| v / peak).collect()
    } else {
        p
    }
}

/// Triangulates from flat `[x0, y0, x1, y1, ..]` anchors and bearings in
/// radians. Returns `[x, y, iterations]`.
pub fn locate(anchors: &[f64], bearings: &[f64]) -> isac_privacy::Result<Vec<f64>> {
    if anchors.len() != 2 * bearings.len() {
        return Err(isac_privacy::Error::Config("need one bearing per anchor".into()));
    }
    let lines: Vec<Line> = anchors
        .chunks(2)
        .zip(bearings)
        .map(|(a, &t)| Line::from_angle(Point::new(a[0], a[1]), t))
        .collect();
    let cfg = ScenarioConfig::profile(Profile::Desk);
    let t = triangulate(&lines, cfg.eta, cfg.gd_max_iter, cfg.gd_tol)?;
    Ok(vec![t.point.x, t.point.y, t.iterations as f64])
}

fn js_err(e: isac_privacy::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn run_trial(seed: u32, p_max_dbm: f64, n_rx: usize) -> Result<String, JsError> {
    trial_json(seed as u64, p_max_dbm, n_rx).map_err(js_err)
}

#[wasm_bindgen]
pub fn trial_beampattern(framework: bool, ap: usize) -> Result<Vec<f64>, JsError> {
    LAST.with(|l| match l.borrow().as_ref() {
        Some(d) => Ok(pattern(d, framework, ap)),
        None => Err(JsError::new("run a trial first")),
    })
}

#[wasm_bindgen]
pub fn triangulate_bearings(anchors: Vec<f64>, bearings: Vec<f64>) -> Result<Vec<f64>, JsError> {
    locate(&anchors, &bearings).map_err(js_err)
}
