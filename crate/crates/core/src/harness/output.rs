use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepTable;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub trials_per_point: usize,
}

impl SweepMetadata {
    pub fn new(config: &ScenarioConfig, trials_per_point: usize) -> Self {
        Self {
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            trials_per_point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub metadata: SweepMetadata,
    pub table: SweepTable,
}

const HEADER: &str = "sweep_value,pd_baseline,pd_baseline_ci_low,pd_baseline_ci_high,\
pd_framework,pd_framework_ci_low,pd_framework_ci_high,sinr_baseline_db,sinr_framework_db,n_feasible,n_trials";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

pub fn to_csv(table: &SweepTable) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            r.sweep_value,
            r.pd_baseline,
            r.pd_baseline_ci_low,
            r.pd_baseline_ci_high,
            r.pd_framework,
            r.pd_framework_ci_low,
            r.pd_framework_ci_high,
            opt(r.sinr_baseline_db),
            opt(r.sinr_framework_db),
            r.n_feasible,
            r.n_trials
        );
    }
    s
}

pub fn emit_results(table: &SweepTable, metadata: &SweepMetadata, path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv(table),
        OutputFormat::Json => {
            let file = ResultsFile {
                metadata: metadata.clone(),
                table: table.clone(),
            };
            serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?
        }
    };
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: &Path) -> Result<ResultsFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
