//! Simulation parameters.
//!
//! Decibel-valued fields keep their unit in the key name (`p_max_dbm`,
//! `gamma_min_db`, ...) both in the struct and in JSON files; the linear
//! values used by the numerics come from the accessor methods.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How receiver candidates are scored from the leakage matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Euclidean norm of each AP column.
    #[default]
    ColumnNorm,
    /// Sum of the squared-norm entries of each AP column.
    ColumnSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Reduced antenna count for desktop-scale Monte Carlo runs.
    Desk,
    /// Full-scale run with 64 antennas per AP.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Side of the square deployment area (m).
    pub grid_side: f64,
    pub n_ap: usize,
    pub n_rx: usize,
    pub n_ue: usize,
    /// Antennas per user.
    pub k_antennas: usize,
    /// Antennas per AP.
    pub m_antennas: usize,
    /// Symbols per frame.
    pub n_samples: usize,
    pub mod_order: usize,
    pub path_loss_exp: f64,
    /// Per-antenna transmit power limit.
    pub p_max_dbm: f64,
    /// Minimum user SINR.
    pub gamma_min_db: f64,
    /// Noise power at users and sensing receivers.
    pub sigma_n_dbm: f64,
    /// Adversary channel-estimation error variance, relative to the channel gain.
    pub sigma_h_db: f64,
    /// Mean-square radar cross section.
    pub alpha_var_db: f64,
    /// Gradient-descent step size of the triangulation.
    pub eta: f64,
    /// Detection radius (m).
    pub r_gd: f64,
    /// Student's-t degrees of freedom.
    pub nu: f64,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub ccp_max_iter: usize,
    pub ccp_tol: f64,
    pub gd_max_iter: usize,
    pub gd_tol: f64,
    pub framework_max_iter: usize,
    /// Tolerance handed to the conic solver.
    pub solver_tol: f64,
    /// Beampattern sweep resolution (degrees).
    pub angle_step_deg: f64,
    pub scoring: Scoring,
    /// Linear variance of the non-line-of-sight clutter entries; 0 disables clutter.
    pub clutter_var: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk)
    }
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn dbm_to_watt(dbm: f64) -> f64 {
    db_to_lin(dbm - 30.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn watt_to_dbm(w: f64) -> f64 {
    lin_to_db(w) + 30.0
}

impl ScenarioConfig {
    pub fn profile(profile: Profile) -> Self {
        let m_antennas = match profile {
            Profile::Desk => 16,
            Profile::Paper => 64,
        };
        Self {
            grid_side: 1000.0,
            n_ap: 6,
            n_rx: 1,
            n_ue: 3,
            k_antennas: 4,
            m_antennas,
            n_samples: 16,
            mod_order: 16,
            path_loss_exp: 3.0,
            p_max_dbm: 35.0,
            gamma_min_db: 3.0,
            sigma_n_dbm: -94.0,
            sigma_h_db: -40.0,
            alpha_var_db: 10.0,
            eta: 1.0,
            r_gd: 10.0,
            nu: 5.0,
            em_max_iter: 100,
            em_tol: 1e-10,
            ccp_max_iter: 100,
            ccp_tol: 0.1,
            gd_max_iter: 10_000,
            gd_tol: 1e-6,
            framework_max_iter: 50,
            solver_tol: 1e-8,
            angle_step_deg: 0.5,
            scoring: Scoring::ColumnNorm,
            clutter_var: 0.0,
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_ap == 0 || self.n_ue == 0 || self.k_antennas == 0 {
            return fail("n_ap, n_ue and k_antennas must be positive");
        }
        if self.n_rx == 0 || self.n_rx >= self.n_ap {
            return fail("n_rx must satisfy 1 <= n_rx < n_ap");
        }
        if self.m_antennas == 0 || self.n_samples == 0 {
            return fail("m_antennas and n_samples must be positive");
        }
        let side = (self.mod_order as f64).sqrt().round() as usize;
        if self.mod_order < 4 || side * side != self.mod_order {
            return fail("mod_order must be a perfect square >= 4");
        }
        if !(self.grid_side > 0.0) || !(self.path_loss_exp > 0.0) {
            return fail("grid_side and path_loss_exp must be positive");
        }
        let positive = [
            self.em_tol,
            self.ccp_tol,
            self.gd_tol,
            self.solver_tol,
            self.eta,
            self.r_gd,
            self.nu,
            self.angle_step_deg,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return fail("tolerances, eta, r_gd, nu and angle_step_deg must be positive");
        }
        if self.em_max_iter == 0
            || self.ccp_max_iter == 0
            || self.gd_max_iter == 0
            || self.framework_max_iter == 0
        {
            return fail("iteration limits must be positive");
        }
        if !(self.clutter_var >= 0.0) {
            return fail("clutter_var must be non-negative");
        }
        Ok(())
    }

    pub fn p_max(&self) -> f64 {
        dbm_to_watt(self.p_max_dbm)
    }

    pub fn gamma_min(&self) -> f64 {
        db_to_lin(self.gamma_min_db)
    }

    /// Noise power σ_n² in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watt(self.sigma_n_dbm)
    }

    pub fn sigma_h2(&self) -> f64 {
        db_to_lin(self.sigma_h_db)
    }

    pub fn alpha_var(&self) -> f64 {
        db_to_lin(self.alpha_var_db)
    }

    pub fn n_tx(&self) -> usize {
        self.n_ap - self.n_rx
    }

    /// Stable digest of every field, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
