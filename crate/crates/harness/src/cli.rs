//! Command-line interface.
//!
//! Exit codes: 0 on success, 2 when the config cannot be read, parsed or
//! validated (including bad flags), 3 when a run fails.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use robust_dist::bounds::Task;

use crate::analytic::{evaluate_bounds, evaluate_emd, BoundsConfig, EmdConfig};
use crate::calibrate::run_calibration;
use crate::config::ExperimentConfig;
use crate::engine::{run_experiment, sweep, RunOptions};
use crate::error::{ConfigError, HarnessError, Result};
use crate::report::{emit_report, key_value_csv, rows_to_csv, write_output, Format};

#[derive(Debug, Parser)]
#[command(name = "robust-dist", version, about = "Distribution learning and testing under manipulation attacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a learning experiment (task = "DL").
    Learn(RunArgs),
    /// Run an identity or uniformity testing experiment (task = "IT" or "UT").
    Test(RunArgs),
    /// Evaluate rate formulas on a grid.
    Bounds(CommonArgs),
    /// Exact earth-mover distance between two small message-sequence laws.
    Emd(CommonArgs),
    /// Tester thresholds, compression constants and, optionally, the power constant.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run once per value, e.g. `n=1024,2048,4096`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Record wall-clock time in JSON reports.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Constants `C` to try for the compressed tester's power, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub power_grid: Vec<f64>,
    /// Number of random compressions for the `c1` quantile.
    #[arg(long)]
    pub compression_seeds: Option<usize>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source }.into())
}

/// Reads, overrides and validates an experiment config.
pub fn load_experiment(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_toml(&read(&args.config)?)?;
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `axis=v1,v2,...`; an empty value list is allowed.
pub fn parse_sweep(spec: &str) -> std::result::Result<(String, Vec<f64>), ConfigError> {
    let (axis, values) = spec.split_once('=').ok_or_else(|| ConfigError::Parse(format!("sweep `{spec}` is not axis=v1,v2,...")))?;
    let values = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| ConfigError::Parse(format!("sweep value `{v}` is not a number"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((axis.trim().to_string(), values))
}

fn run_tasks(args: &RunArgs, allowed: &[Task], name: &str) -> Result<()> {
    let c = &args.common;
    let cfg = load_experiment(c)?;
    if !allowed.contains(&cfg.task) {
        return Err(ConfigError::Invalid(vec![format!("`{name}` cannot run task {}", cfg.task.label())]).into());
    }
    let opts = RunOptions { workers: c.workers, timing: args.timing };
    let reports = match &args.sweep {
        Some(s) => {
            let (axis, values) = parse_sweep(s)?;
            sweep(&cfg, &axis, &values, &opts)?
        }
        None => vec![run_experiment(&cfg, &opts)?],
    };
    emit_report(&reports, c.format, c.out.as_deref())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| HarnessError::Runtime(format!("json encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Learn(a) => run_tasks(a, &[Task::Learning], "learn"),
        Command::Test(a) => run_tasks(a, &[Task::IdentityTesting, Task::UniformityTesting], "test"),
        Command::Bounds(a) => {
            let cfg = BoundsConfig::from_toml(&read(&a.config)?)?;
            let report = evaluate_bounds(&cfg)?;
            let text = match a.format {
                Format::Csv => rows_to_csv(&report.rows())?,
                Format::Json => json(&report)?,
            };
            write_output(&text, a.out.as_deref())
        }
        Command::Emd(a) => {
            let cfg = EmdConfig::from_toml(&read(&a.config)?)?;
            let report = evaluate_emd(&cfg)?;
            let text = match a.format {
                Format::Csv => key_value_csv(&report.pairs()),
                Format::Json => json(&report)?,
            };
            write_output(&text, a.out.as_deref())
        }
        Command::Calibrate(a) => {
            let c = &a.common;
            let cfg = load_experiment(c)?;
            if cfg.task == Task::Learning {
                return Err(ConfigError::Invalid(vec!["calibration needs a testing task".into()]).into());
            }
            let opts = RunOptions { workers: c.workers, timing: false };
            let report = run_calibration(&cfg, a.compression_seeds, &a.power_grid, &opts)?;
            let text = match c.format {
                Format::Csv => report.to_csv()?,
                Format::Json => json(&report)?,
            };
            write_output(&text, c.out.as_deref())
        }
    }
}
