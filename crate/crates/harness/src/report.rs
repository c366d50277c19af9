//! Risk reports and their CSV/JSON encodings.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub const CSV_HEADER: [&str; 14] = [
    "task",
    "k",
    "n",
    "ell",
    "epsilon",
    "gamma",
    "attack",
    "metric",
    "value",
    "stderr",
    "trials",
    "bound_upper",
    "bound_lower",
    "seed",
];

pub const RISK_NOTE: &str =
    "empirical risk under the listed sources and the configured attack, not minimax risk; bounds are rate formulas with constants set to 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub task: String,
    pub k: usize,
    pub n: usize,
    pub ell: Option<u32>,
    pub epsilon: Option<f64>,
    pub gamma: f64,
    pub attack: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub bound_upper: f64,
    pub bound_lower: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl RiskRow {
    fn csv_fields(&self) -> [String; 14] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.task.clone(),
            self.k.to_string(),
            self.n.to_string(),
            opt(self.ell.map(|v| v.to_string())),
            opt(self.epsilon.map(|v| v.to_string())),
            self.gamma.to_string(),
            self.attack.clone(),
            self.metric.clone(),
            self.value.to_string(),
            self.stderr.to_string(),
            self.trials.to_string(),
            self.bound_upper.to_string(),
            self.bound_lower.to_string(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub note: String,
    pub rows: Vec<RiskRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl RiskReport {
    pub fn new(config: ExperimentConfig, config_hash: String, rows: Vec<RiskRow>, wall_clock_ms: Option<u64>) -> Self {
        Self { config_hash, config, note: RISK_NOTE.to_string(), rows, wall_clock_ms }
    }

    pub fn row(&self, gamma: f64, metric: &str) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.gamma == gamma && r.metric == metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn to_csv(reports: &[RiskReport]) -> Result<String> {
    rows_to_csv(reports.iter().flat_map(|r| r.rows.iter()))
}

pub fn rows_to_csv<'a>(rows: impl IntoIterator<Item = &'a RiskRow>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Runtime(format!("csv encoding failed: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        w.write_record(row.csv_fields()).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Runtime(format!("csv encoding failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Runtime(e.to_string()))
}

/// A single report encodes as an object, several as an array.
pub fn to_json(reports: &[RiskReport]) -> Result<String> {
    let mut s = match reports {
        [one] => serde_json::to_string_pretty(one),
        many => serde_json::to_string_pretty(many),
    }
    .map_err(|e| HarnessError::Runtime(format!("json encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn render(reports: &[RiskReport], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(reports),
        Format::Json => to_json(reports),
    }
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Write { path: p.to_path_buf(), source }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| HarnessError::Write { path: PathBuf::from("<stdout>"), source })
        }
    }
}

pub fn emit_report(reports: &[RiskReport], format: Format, path: Option<&Path>) -> Result<()> {
    write_output(&render(reports, format)?, path)
}

/// Two-column `metric,value` table for small outputs.
pub fn key_value_csv(pairs: &[(String, f64)]) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}
