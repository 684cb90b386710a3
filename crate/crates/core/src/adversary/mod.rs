//! Passive localization attack by a compromised user.
//!
//! The adversary is assumed to separate each AP's contribution, estimates
//! that AP's transmit vectors with EM, turns them into an angle-of-departure
//! estimate and triangulates the target from the resulting lines.

mod em;
mod locate;

pub use em::{
    em_e_step, em_estimate_signal, em_m_step, gamma_mean_u, m_step_objective, run_em, EmOutcome, EmParams, EmState,
};
pub use locate::{
    angle_grid, beampattern, estimate_angle, half_plane_grid, line_mse, signal_covariance, triangulate, Line,
    Triangulation,
};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{complex_normal, complex_normal_vec, stream, Stream};
use crate::scenario::{angle_of, Point, Scenario};
use crate::signals::{transmit_all, PrecoderMatrix, SymbolFrame};

/// User index acting as the adversary.
pub const ADVERSARY: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Transmit vectors estimated with EM.
    Em,
    /// The adversary knows the transmit vectors exactly.
    TrueSignal,
}

/// `y[n][k] = h_kᴴ x[n] + noise`, one row per sample.
pub fn observe_per_ap<R: Rng>(
    channels: &[DVector<Complex64>],
    x: &[DVector<Complex64>],
    noise_power: f64,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    x.iter()
        .map(|xn| {
            channels
                .iter()
                .map(|h| h.dotc(xn) + complex_normal(rng, noise_power))
                .collect()
        })
        .collect()
}

/// `ĥ = h + e`, `e ~ CN(0, σ_h² I)`.
pub fn noisy_channel_estimate<R: Rng>(h: &DVector<Complex64>, sigma_h2: f64, rng: &mut R) -> DVector<Complex64> {
    h + complex_normal_vec(rng, h.len(), sigma_h2)
}

#[derive(Debug, Clone, Serialize)]
pub struct ApEstimate {
    pub ap: usize,
    pub true_angle: f64,
    pub estimated_angle: f64,
    /// Fraction of samples whose EM run met the tolerance.
    pub em_converged: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackResult {
    pub per_ap: Vec<ApEstimate>,
    pub triangulation: Option<Triangulation>,
    pub q_hat: Option<Point>,
    /// Distance from the estimate to the target, infinite without an estimate.
    pub error_m: f64,
    pub detected: bool,
}

/// Runs the attack against the transmitters of `w`.
pub fn run_attack(
    scenario: &Scenario,
    w: &PrecoderMatrix,
    frame: &SymbolFrame,
    config: &ScenarioConfig,
    seed: u64,
    mode: AttackMode,
) -> Result<AttackResult> {
    let noise = config.noise_power();
    let signals = transmit_all(w, frame);
    let grid_step = config.angle_step_deg;
    let mut per_ap = Vec::with_capacity(w.transmitters.len());
    let mut lines = Vec::with_capacity(w.transmitters.len());
    for (b, &ap) in w.transmitters.iter().enumerate() {
        let mut rng = stream(seed, Stream::Attack, ap as u64);
        let pos = scenario.ap_positions[ap];
        let true_angle = angle_of(&pos, &scenario.target);
        let (x_hat, em_converged) = match mode {
            AttackMode::TrueSignal => (signals[b].clone(), 1.0),
            AttackMode::Em => {
                let h = &scenario.channels[ap][ADVERSARY];
                let y = observe_per_ap(h, &signals[b], noise, &mut rng);
                let sigma_h2 = config.sigma_h2() * scenario.beta_ue[ap][ADVERSARY];
                let h_hat: Vec<_> = h.iter().map(|hk| noisy_channel_estimate(hk, sigma_h2, &mut rng)).collect();
                let params = EmParams {
                    nu: config.nu,
                    noise_power: noise,
                    sigma_h2,
                    max_iter: config.em_max_iter,
                    tol: config.em_tol,
                };
                let out = em_estimate_signal(&y, &h_hat, &params, &mut rng)?;
                let conv = out.converged.iter().filter(|c| **c).count() as f64 / out.converged.len().max(1) as f64;
                (out.x_hat, conv)
            }
        };
        let estimated_angle = estimate_angle(&x_hat, &half_plane_grid(true_angle, grid_step))?;
        lines.push(Line::from_angle(pos, estimated_angle));
        per_ap.push(ApEstimate {
            ap,
            true_angle,
            estimated_angle,
            em_converged,
        });
    }
    let triangulation = match triangulate(&lines, config.eta, config.gd_max_iter, config.gd_tol) {
        Ok(t) => Some(t),
        Err(Error::Config(_)) => None,
        Err(e) => return Err(e),
    };
    let q_hat = triangulation.as_ref().map(|t| t.point);
    let error_m = q_hat.map_or(f64::INFINITY, |q| (q - scenario.target).norm());
    Ok(AttackResult {
        per_ap,
        triangulation,
        q_hat,
        error_m,
        detected: error_m <= config.r_gd,
    })
}
