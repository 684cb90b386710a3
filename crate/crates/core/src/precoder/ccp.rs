use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::quadratic::build_sensing_quadratic;
use super::subproblem::{solve_ccp_subproblem, KktResiduals, SubproblemLimits};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{complex_normal, stream, Stream};
use crate::scenario::{Scenario, SensingLinks};
use crate::signals::{user_sinr, PrecoderMatrix, SymbolFrame};

/// Fresh random starts tried after the first one turns out infeasible.
const INIT_RETRIES: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CcpStatus {
    Converged,
    IterCap,
    /// A later subproblem failed numerically; the last good iterate is kept.
    SolverStopped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CcpState {
    pub iteration: usize,
    /// Sensing SINR (linear) after every completed step.
    pub objective_history: Vec<f64>,
    pub kkt_history: Vec<KktResiduals>,
    pub status: CcpStatus,
    /// Random starts used, counting the successful one.
    pub starts: u64,
    /// Smallest user SINR over the SINR floor (linear ratio).
    pub min_sinr_margin: f64,
    /// Largest row power over the power limit.
    pub max_power_ratio: f64,
}

impl CcpState {
    pub fn final_sinr(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }

    pub fn max_kkt(&self) -> f64 {
        self.kkt_history.iter().map(KktResiduals::max).fold(0.0, f64::max)
    }

    /// JSON diagnostic dump of the run.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

/// Random start scaled so the strongest row sits 3 dB under the power limit.
pub fn random_start(rows: usize, cols: usize, p_max: f64, seed: u64, attempt: u64) -> DMatrix<Complex64> {
    let mut rng = stream(seed, Stream::PrecoderInit, attempt);
    let mut w = DMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0));
    let peak = w.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    w *= Complex64::new((0.5 * p_max / peak).sqrt(), 0.0);
    w
}

/// Maximizes the sensing SINR for fixed AP roles with the concave-convex
/// procedure.
pub fn optimize_precoder(
    scenario: &Scenario,
    links: &SensingLinks,
    frame: &SymbolFrame,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<(PrecoderMatrix, CcpState)> {
    if links.transmitters.is_empty() || links.receivers.is_empty() {
        return Err(Error::Config("need at least one transmitter and one receiver".into()));
    }
    let m = scenario.m_antennas;
    let n_ue = scenario.n_ue();
    let rows = m * links.transmitters.len();
    let noise = config.noise_power();
    let quad = build_sensing_quadratic(scenario, links);
    let channels: Vec<_> = (0..n_ue).map(|i| scenario.stacked_channel(&links.transmitters, i)).collect();
    let limits = SubproblemLimits {
        gamma_min: config.gamma_min(),
        p_max: config.p_max(),
        noise_power: noise,
        tol: config.solver_tol,
    };

    // first step, with restarts on infeasibility
    let mut attempt = 0;
    let (mut w_prev, first) = loop {
        let w0 = random_start(rows, n_ue + 1, limits.p_max, seed, attempt);
        let lin = quad.linearize(&w0, frame, noise);
        match solve_ccp_subproblem(&lin, &channels, &w0, limits) {
            Ok(sol) => break (w0, sol),
            Err(Error::Infeasible) if attempt < INIT_RETRIES => attempt += 1,
            Err(e) => return Err(e),
        }
    };
    let mut prev_sinr = quad.sinr(&w_prev, frame, noise);
    w_prev.copy_from(&first.w);
    let mut sinr = quad.sinr(&w_prev, frame, noise);
    let mut state = CcpState {
        iteration: 1,
        objective_history: vec![sinr],
        kkt_history: vec![first.kkt],
        status: CcpStatus::IterCap,
        starts: attempt + 1,
        min_sinr_margin: 0.0,
        max_power_ratio: 0.0,
    };

    loop {
        if (sinr - prev_sinr).abs() < config.ccp_tol {
            state.status = CcpStatus::Converged;
            break;
        }
        if state.iteration >= config.ccp_max_iter {
            break;
        }
        let lin = quad.linearize(&w_prev, frame, noise);
        match solve_ccp_subproblem(&lin, &channels, &w_prev, limits) {
            Ok(sol) => {
                prev_sinr = sinr;
                sinr = quad.sinr(&sol.w, frame, noise);
                w_prev = sol.w;
                state.iteration += 1;
                state.objective_history.push(sinr);
                state.kkt_history.push(sol.kkt);
            }
            Err(_) => {
                state.status = CcpStatus::SolverStopped;
                break;
            }
        }
    }

    let w = PrecoderMatrix {
        w: w_prev,
        transmitters: links.transmitters.clone(),
        m_antennas: m,
    };
    state.min_sinr_margin = (0..n_ue)
        .map(|i| user_sinr(&w, scenario, i, noise) / limits.gamma_min)
        .fold(f64::INFINITY, f64::min);
    state.max_power_ratio = w.max_row_power() / limits.p_max;
    Ok((w, state))
}
