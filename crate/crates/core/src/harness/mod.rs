//! Monte Carlo driver: paired baseline/framework trials, sweeps and result
//! files.

mod output;
mod stats;

pub use output::{emit_results, read_results, to_csv, OutputFormat, ResultsFile, SweepMetadata};
pub use stats::{mean, median, two_proportion_p_value, two_proportion_p_value_two_sided, wilson_interval};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{run_attack, AttackMode, AttackResult};
use crate::config::{lin_to_db, watt_to_dbm, ScenarioConfig};
use crate::error::{Error, Result};
use crate::framework::{run_baseline, run_framework, FrameworkResult};
use crate::rng::{derive_seed, Stream};
use crate::scenario::{generate_scenario, Scenario};
use crate::signals::{generate_frame, user_sinr, PrecoderMatrix, SymbolFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOptions {
    pub attack: AttackMode,
    /// Zero the sensing column of both precoders before the attack.
    pub zero_sensing: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            attack: AttackMode::Em,
            zero_sensing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Both arms produced a precoder meeting the constraints.
    pub feasible: bool,
    pub detected_baseline: bool,
    pub detected_framework: bool,
    pub gamma_s_baseline_db: f64,
    pub gamma_s_framework_db: f64,
    /// Smallest user SINR over both arms.
    pub min_user_sinr_db: f64,
    /// Largest per-antenna power over both arms.
    pub max_row_power_dbm: f64,
    pub framework_iters: usize,
    pub framework_converged: bool,
    pub error_baseline_m: f64,
    pub error_framework_m: f64,
    /// Every triangulation of the trial had a non-increasing MSE.
    pub gd_monotone: bool,
    /// Number of receivers the framework picked that the baseline did not.
    pub receiver_changes: usize,
    pub failure: Option<String>,
}

impl TrialResult {
    fn infeasible(seed: u64, err: &Error) -> Self {
        Self {
            seed,
            feasible: false,
            detected_baseline: false,
            detected_framework: false,
            gamma_s_baseline_db: f64::NAN,
            gamma_s_framework_db: f64::NAN,
            min_user_sinr_db: f64::NAN,
            max_row_power_dbm: f64::NAN,
            framework_iters: 0,
            framework_converged: false,
            error_baseline_m: f64::INFINITY,
            error_framework_m: f64::INFINITY,
            gd_monotone: true,
            receiver_changes: 0,
            failure: Some(err.to_string()),
        }
    }
}

/// Everything one trial produced, for inspection and the demo.
#[derive(Debug, Clone)]
pub struct TrialDetail {
    pub scenario: Scenario,
    pub frame: SymbolFrame,
    pub baseline: FrameworkResult,
    pub framework: FrameworkResult,
    pub attack_baseline: AttackResult,
    pub attack_framework: AttackResult,
}

fn min_sinr_db(w: &PrecoderMatrix, scenario: &Scenario, noise: f64) -> f64 {
    (0..scenario.n_ue())
        .map(|i| lin_to_db(user_sinr(w, scenario, i, noise)))
        .fold(f64::INFINITY, f64::min)
}

fn zero_sensing(w: &PrecoderMatrix) -> PrecoderMatrix {
    let mut out = w.clone();
    let t = out.sensing_index();
    out.w.column_mut(t).fill(num_complex::Complex64::new(0.0, 0.0));
    out
}

/// Runs one paired trial and keeps all intermediate products.
pub fn run_trial_detail(config: &ScenarioConfig, seed: u64, options: &TrialOptions) -> Result<TrialDetail> {
    let scenario = generate_scenario(config, seed)?;
    let frame = generate_frame(config.n_ue, config.n_samples, config.mod_order, derive_seed(seed, Stream::Frame, 0))?;
    let baseline = run_baseline(&scenario, &frame, config, seed)?;
    let framework = run_framework(&scenario, &frame, config, seed)?;
    let attack = |w: &PrecoderMatrix| {
        let w = if options.zero_sensing { zero_sensing(w) } else { w.clone() };
        run_attack(&scenario, &w, &frame, config, seed, options.attack)
    };
    let attack_baseline = attack(&baseline.w_final)?;
    let attack_framework = attack(&framework.w_final)?;
    Ok(TrialDetail {
        scenario,
        frame,
        baseline,
        framework,
        attack_baseline,
        attack_framework,
    })
}

pub fn run_trial(config: &ScenarioConfig, seed: u64) -> TrialResult {
    run_trial_with(config, seed, &TrialOptions::default())
}

/// Failures are recorded in the result rather than returned.
pub fn run_trial_with(config: &ScenarioConfig, seed: u64, options: &TrialOptions) -> TrialResult {
    let d = match run_trial_detail(config, seed, options) {
        Ok(d) => d,
        Err(e) => return TrialResult::infeasible(seed, &e),
    };
    let noise = config.noise_power();
    let min_user = min_sinr_db(&d.baseline.w_final, &d.scenario, noise).min(min_sinr_db(&d.framework.w_final, &d.scenario, noise));
    let max_power = watt_to_dbm(d.baseline.w_final.max_row_power().max(d.framework.w_final.max_row_power()));
    let gd_monotone = [&d.attack_baseline, &d.attack_framework]
        .iter()
        .all(|a| a.triangulation.as_ref().map_or(true, |t| t.mse_monotone()));
    let receiver_changes = d
        .framework
        .r_final
        .receivers
        .iter()
        .filter(|r| !d.baseline.r_final.receivers.contains(r))
        .count();
    TrialResult {
        seed,
        feasible: true,
        detected_baseline: d.attack_baseline.detected,
        detected_framework: d.attack_framework.detected,
        gamma_s_baseline_db: lin_to_db(d.baseline.sensing_sinr),
        gamma_s_framework_db: lin_to_db(d.framework.sensing_sinr),
        min_user_sinr_db: min_user,
        max_row_power_dbm: max_power,
        framework_iters: d.framework.iterations,
        framework_converged: d.framework.converged,
        error_baseline_m: d.attack_baseline.error_m,
        error_framework_m: d.attack_framework.error_m,
        gd_monotone,
        receiver_changes,
        failure: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PMax,
    NRx,
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p_max" => Ok(Self::PMax),
            "n_rx" => Ok(Self::NRx),
            other => Err(Error::Config(format!("unknown sweep variable `{other}` (p_max or n_rx)"))),
        }
    }
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::PMax => "p_max",
            Self::NRx => "n_rx",
        }
    }

    /// `base` with the swept field set to `value` (dBm for power).
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        match self {
            Self::PMax => c.p_max_dbm = value,
            Self::NRx => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("n_rx must be a positive integer, got {value}")));
                }
                c.n_rx = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials_per_point: usize,
    pub base_config: ScenarioConfig,
    pub options: TrialOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub pd_baseline: f64,
    pub pd_baseline_ci_low: f64,
    pub pd_baseline_ci_high: f64,
    pub pd_framework: f64,
    pub pd_framework_ci_low: f64,
    pub pd_framework_ci_high: f64,
    /// Mean sensing SINR over feasible trials; `None` when there are none.
    pub sinr_baseline_db: Option<f64>,
    pub sinr_framework_db: Option<f64>,
    pub detections_baseline: usize,
    pub detections_framework: usize,
    pub n_feasible: usize,
    pub n_trials: usize,
}

impl SweepRow {
    pub fn from_trials(sweep_value: f64, trials: &[TrialResult]) -> Self {
        let feasible: Vec<&TrialResult> = trials.iter().filter(|t| t.feasible).collect();
        let n = feasible.len();
        let xb = feasible.iter().filter(|t| t.detected_baseline).count();
        let xf = feasible.iter().filter(|t| t.detected_framework).count();
        let rate = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        let (bl, bh) = wilson_interval(xb, n);
        let (fl, fh) = wilson_interval(xf, n);
        let sb: Vec<f64> = feasible.iter().map(|t| t.gamma_s_baseline_db).collect();
        let sf: Vec<f64> = feasible.iter().map(|t| t.gamma_s_framework_db).collect();
        Self {
            sweep_value,
            pd_baseline: rate(xb),
            pd_baseline_ci_low: bl,
            pd_baseline_ci_high: bh,
            pd_framework: rate(xf),
            pd_framework_ci_low: fl,
            pd_framework_ci_high: fh,
            sinr_baseline_db: mean(&sb),
            sinr_framework_db: mean(&sf),
            detections_baseline: xb,
            detections_framework: xf,
            n_feasible: n,
            n_trials: trials.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: SweepTable,
    /// Per-point trial records, aligned with `table.rows`.
    pub trials: Vec<Vec<TrialResult>>,
}

/// Seed of trial `t`; the same across sweep points so every point sees the
/// same worlds.
pub fn trial_seed(base: u64, t: usize) -> u64 {
    derive_seed(base, Stream::Trial, t as u64)
}

/// Runs `trials` paired trials of `config`, in parallel when enabled.
pub fn run_trials(config: &ScenarioConfig, trials: usize, options: &TrialOptions) -> Vec<TrialResult> {
    let run = |t: usize| run_trial_with(config, trial_seed(config.seed, t), options);
    #[cfg(feature = "parallel")]
    {
        (0..trials).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(run).collect()
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    if spec.values.is_empty() || spec.trials_per_point == 0 {
        return Err(Error::Config("sweep needs at least one value and one trial".into()));
    }
    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|&v| spec.variable.apply(&spec.base_config, v))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(configs.len());
    let mut trials = Vec::with_capacity(configs.len());
    for (cfg, &v) in configs.iter().zip(&spec.values) {
        let t = run_trials(cfg, spec.trials_per_point, &spec.options);
        rows.push(SweepRow::from_trials(v, &t));
        trials.push(t);
    }
    Ok(SweepOutput {
        table: SweepTable {
            variable: spec.variable,
            rows,
        },
        trials,
    })
}
