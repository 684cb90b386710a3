use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_privacy::harness::{
    emit_results, run_sweep, run_trial_detail, run_trials, trial_seed, OutputFormat, SweepMetadata, SweepRow, SweepSpec,
    SweepTable, SweepVariable, TrialOptions,
};
use isac_privacy::{verify, Profile, ScenarioConfig};

#[derive(Parser)]
#[command(name = "isac-sim", version, about = "Privacy-preserving cell-free MIMO ISAC simulator")]
struct Cli {
    /// Built-in parameter set used when no config file is given.
    #[arg(long, global = true, default_value = "desk")]
    profile: Profile,

    /// JSON config file; missing fields take their default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired baseline/framework trials at one operating point.
    Simulate {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection probability against P_max (dBm) or the number of receivers.
    Sweep {
        #[arg(long)]
        variable: SweepVariable,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full JSON trace of a single trial.
    Trial {
        /// Trial index under the base seed.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the built-in property checks; exits with 2 on any failure.
    Verify,
}

fn load_config(cli: &Cli, seed: Option<u64>) -> isac_privacy::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::profile(cli.profile),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_table(table: &SweepTable, meta: &SweepMetadata, out: &Path) -> isac_privacy::Result<()> {
    emit_results(table, meta, out, OutputFormat::from_path(out))?;
    for r in &table.rows {
        eprintln!(
            "{} = {}: P_D baseline {:.3} [{:.3}, {:.3}], framework {:.3} [{:.3}, {:.3}], {} of {} trials feasible",
            table.variable.name(),
            r.sweep_value,
            r.pd_baseline,
            r.pd_baseline_ci_low,
            r.pd_baseline_ci_high,
            r.pd_framework,
            r.pd_framework_ci_low,
            r.pd_framework_ci_high,
            r.n_feasible,
            r.n_trials
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> isac_privacy::Result<ExitCode> {
    match &cli.command {
        Command::Simulate { trials, seed, out } => {
            let cfg = load_config(cli, *seed)?;
            let results = run_trials(&cfg, *trials, &TrialOptions::default());
            let table = SweepTable {
                variable: SweepVariable::PMax,
                rows: vec![SweepRow::from_trials(cfg.p_max_dbm, &results)],
            };
            write_table(&table, &SweepMetadata::new(&cfg, *trials), out)?;
        }
        Command::Sweep {
            variable,
            values,
            trials,
            seed,
            out,
        } => {
            let cfg = load_config(cli, *seed)?;
            let spec = SweepSpec {
                variable: *variable,
                values: values.clone(),
                trials_per_point: *trials,
                base_config: cfg.clone(),
                options: TrialOptions::default(),
            };
            let output = run_sweep(&spec)?;
            write_table(&output.table, &SweepMetadata::new(&cfg, *trials), out)?;
        }
        Command::Trial { index, seed, out } => {
            let cfg = load_config(cli, *seed)?;
            let d = run_trial_detail(&cfg, trial_seed(cfg.seed, *index), &TrialOptions::default())?;
            let trace = serde_json::json!({
                "config_hash": cfg.hash(),
                "target": [d.scenario.target.x, d.scenario.target.y],
                "baseline": d.baseline.trace(),
                "framework": d.framework.trace(),
                "ccp": d.framework.ccp.to_json(),
                "attack_baseline": d.attack_baseline,
                "attack_framework": d.attack_framework,
            });
            let text = serde_json::to_string_pretty(&trace).expect("trace serializes");
            match out {
                Some(path) => std::fs::write(path, text).map_err(|source| isac_privacy::Error::Io {
                    path: path.clone(),
                    source,
                })?,
                None => println!("{text}"),
            }
        }
        Command::Verify => {
            let checks = verify::run_checks();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
