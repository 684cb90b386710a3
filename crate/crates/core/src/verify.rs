//! Fast self-check run by the command-line `verify` command.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::adversary::{em_e_step, em_m_step, gamma_mean_u, triangulate, EmParams, Line};
use crate::config::{Profile, ScenarioConfig, Scoring};
use crate::harness::{run_trial, trial_seed};
use crate::precoder::optimize_precoder;
use crate::rng::{complex_normal_vec, rng_from};
use crate::scenario::{array_response, generate_scenario, Point, SensingLinks};
use crate::selection::{select_receivers, MiMatrix};
use crate::signals::generate_frame;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn array_norm() -> Check {
    let mut worst = 0.0f64;
    for m in [1usize, 4, 16, 64] {
        for i in 0..360 {
            let t = -PI + i as f64 * PI / 180.0;
            worst = worst.max((array_response(t, m).norm_squared() - m as f64).abs());
        }
    }
    check("array response norm", worst < 1e-9, format!("max deviation {worst:.2e}"))
}

fn scale_mean() -> Check {
    let (nu, k, c) = (5.0, 4usize, 3.0);
    let g = Gamma::new((nu + 2.0 * k as f64) / 2.0, 2.0 / (nu + c)).expect("valid gamma");
    let mut rng = rng_from(1);
    let n = 200_000;
    let mc = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
    let exact = gamma_mean_u(nu, k, c);
    let rel = ((mc - exact) / exact).abs();
    check("scale posterior mean", rel < 0.01, format!("relative error {rel:.2e}"))
}

fn m_step_normal_equations() -> Check {
    let mut rng = rng_from(2);
    let h: Vec<_> = (0..4).map(|_| complex_normal_vec(&mut rng, 8, 1.0)).collect();
    let x = complex_normal_vec(&mut rng, 8, 1.0);
    let y: Vec<Complex64> = h.iter().map(|hk| hk.dotc(&x)).collect();
    let params = EmParams {
        nu: 5.0,
        noise_power: 1.0,
        sigma_h2: 0.1,
        max_iter: 1,
        tol: 1e-10,
    };
    let Ok((e_h, omega, _)) = em_e_step(&y, &x, &h, 1.0, &params) else {
        return check("M-step normal equations", false, "E-step failed".into());
    };
    let x_hat = em_m_step(&y, &e_h, &omega);
    let mut lhs = &omega * Complex64::new(8.0, 0.0);
    let mut rhs = DVector::zeros(8);
    for (e, yk) in e_h.iter().zip(&y) {
        lhs += e * e.adjoint();
        rhs += e * *yk;
    }
    let rel = (&lhs * &x_hat - &rhs).norm() / rhs.norm();
    check("M-step normal equations", rel < 1e-8, format!("relative residual {rel:.2e}"))
}

fn triangulation_vs_least_squares() -> Check {
    let mut rng = rng_from(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let lines: Vec<Line> = (0..4)
            .map(|_| Line::from_angle(Point::new(rng.gen::<f64>() * 1000.0, rng.gen::<f64>() * 1000.0), rng.gen::<f64>() * PI))
            .collect();
        let mut a = Matrix2::zeros();
        let mut b = Vector2::zeros();
        for l in &lines {
            let p = Matrix2::identity() - l.direction * l.direction.transpose();
            a += p;
            b += p * l.anchor;
        }
        if a.determinant() < 0.5 {
            continue;
        }
        let oracle = a.lu().solve(&b).expect("non-singular");
        match triangulate(&lines, 1.0, 10_000, 1e-6) {
            Ok(t) if t.mse_monotone() => worst = worst.max((t.point - oracle).norm()),
            _ => return check("triangulation", false, "failed or non-monotone".into()),
        }
    }
    check("triangulation", worst < 1e-4, format!("max distance to least squares {worst:.2e} m"))
}

fn selection_vs_exhaustive() -> Check {
    let mut rng = rng_from(4);
    for _ in 0..200 {
        let n_ap = rng.gen_range(2..=8);
        let n_rx = rng.gen_range(1..n_ap);
        let mi = MiMatrix(DMatrix::from_fn(3, n_ap, |_, _| rng.gen_range(0..4) as f64));
        let scores = mi.scores(Scoring::ColumnSum);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..(1 << n_ap) {
            if mask.count_ones() as usize != n_rx {
                continue;
            }
            let set: Vec<usize> = (0..n_ap).filter(|i| mask & (1 << i) != 0).collect();
            let total: f64 = set.iter().map(|&i| scores[i]).sum();
            if best.as_ref().map_or(true, |(b, s)| total > *b || (total == *b && set < *s)) {
                best = Some((total, set));
            }
        }
        let got = select_receivers(&mi, n_rx, Scoring::ColumnSum).map(|c| c.receivers);
        if got.ok() != best.map(|b| b.1) {
            return check("receiver selection", false, "mismatch with exhaustive search".into());
        }
    }
    check("receiver selection", true, "200 random cases".into())
}

fn ccp_ascent(cfg: &ScenarioConfig) -> Check {
    let mut worst_kkt = 0.0f64;
    for seed in 0..5u64 {
        let Ok(scenario) = generate_scenario(cfg, seed) else {
            return check("CCP ascent", false, "scenario failed".into());
        };
        let frame = generate_frame(cfg.n_ue, cfg.n_samples, cfg.mod_order, seed).expect("valid frame");
        let links = SensingLinks {
            transmitters: (1..cfg.n_ap).collect(),
            receivers: vec![0],
        };
        match optimize_precoder(&scenario, &links, &frame, cfg, seed) {
            Ok((_, state)) => {
                if state.objective_history.windows(2).any(|p| p[1] < p[0] * (1.0 - 1e-6)) {
                    return check("CCP ascent", false, format!("objective decreased for seed {seed}"));
                }
                worst_kkt = worst_kkt.max(state.max_kkt());
            }
            Err(e) => return check("CCP ascent", false, format!("seed {seed}: {e}")),
        }
    }
    check("CCP ascent", worst_kkt < 1e-6, format!("max KKT residual {worst_kkt:.2e}"))
}

fn trial_determinism(cfg: &ScenarioConfig) -> Check {
    let seed = trial_seed(cfg.seed, 0);
    let a = run_trial(cfg, seed);
    let b = run_trial(cfg, seed);
    let ok = a == b && a.feasible;
    let constraints = a.min_user_sinr_db >= cfg.gamma_min_db - 0.01 && a.max_row_power_dbm <= cfg.p_max_dbm + 0.01;
    check(
        "trial determinism and constraints",
        ok && constraints,
        format!("min user SINR {:.3} dB, max row power {:.3} dBm", a.min_user_sinr_db, a.max_row_power_dbm),
    )
}

/// Runs every check on the desk profile.
pub fn run_checks() -> Vec<Check> {
    let cfg = ScenarioConfig::profile(Profile::Desk);
    vec![
        array_norm(),
        scale_mean(),
        m_step_normal_equations(),
        triangulation_vs_least_squares(),
        selection_vs_exhaustive(),
        ccp_ascent(&cfg),
        trial_determinism(&cfg),
    ]
}
