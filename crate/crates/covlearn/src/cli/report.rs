//! Per-trial report rows and the success count against the 2/3 contract.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;

/// Fraction of trials that must pass.
pub const CONTRACT: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub metric: &'static str,
    pub comparison: Comparison,
    pub threshold: f64,
}

impl Criterion {
    pub fn accepts(&self, value: f64) -> bool {
        match self.comparison {
            Comparison::AtMost => value <= self.threshold,
            Comparison::AtLeast => value >= self.threshold,
        }
    }
}

/// One trial. Metric columns that do not apply stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub l1_error: Option<f64>,
    pub coverage_fraction: Option<f64>,
    pub classification_error: Option<f64>,
    pub average_error: Option<f64>,
    /// 95% half-width of the measured metric.
    pub half_width: Option<f64>,
    pub eval_samples: u64,
    pub samples_consumed: Option<u128>,
    pub privacy_epsilon: Option<f64>,
    pub queries_used: Option<u64>,
    pub queries_allowed: Option<u64>,
    pub passed: bool,
    pub error: Option<String>,
}

impl TrialRow {
    pub fn metric(&self) -> Option<f64> {
        self.l1_error.or(self.coverage_fraction).or(self.classification_error).or(self.average_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub successes: usize,
    pub success_fraction: f64,
    pub contract: f64,
    pub required_successes: usize,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: &'static str,
    /// Learner name or release variant.
    pub subject: String,
    pub n: usize,
    pub seed: u64,
    pub trials: usize,
    pub criterion: Criterion,
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

impl Report {
    pub fn new(command: &'static str, subject: String, n: usize, seed: u64, criterion: Criterion, rows: Vec<TrialRow>) -> Self {
        let trials = rows.len();
        let successes = rows.iter().filter(|r| r.passed).count();
        let required_successes = (CONTRACT * trials as f64 - 1e-9).ceil() as usize;
        let aggregate = Aggregate {
            successes,
            success_fraction: successes as f64 / trials as f64,
            contract: CONTRACT,
            required_successes,
            met: successes >= required_successes,
        };
        Report { command, subject, n, seed, trials, criterion, rows, aggregate }
    }

    /// Writes `report.json` and `report.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let json = dir.join("report.json");
        write_file(&json, &(serde_json::to_string_pretty(self).expect("reports serialize") + "\n"))?;
        let csv_path = dir.join("report.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        write_file(&csv_path, &String::from_utf8(bytes).expect("csv output is UTF-8"))?;
        Ok(vec![json, csv_path])
    }

    /// Human-readable summary with every half-width.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let c = &self.criterion;
        let op = if c.comparison == Comparison::AtMost { "<=" } else { ">=" };
        writeln!(out, "{} {} n={} seed={} criterion: {} {op} {}", self.command, self.subject, self.n, self.seed, c.metric, c.threshold)
            .unwrap();
        for r in &self.rows {
            let verdict = if r.passed { "pass" } else { "FAIL" };
            match (r.metric(), &r.error) {
                (_, Some(e)) => writeln!(out, "  trial {:>3} seed {:>20}  {verdict}  error: {e}", r.trial, r.seed),
                (Some(v), None) => writeln!(
                    out,
                    "  trial {:>3} seed {:>20}  {verdict}  {} = {v:.4} ± {:.4}",
                    r.trial,
                    r.seed,
                    c.metric,
                    r.half_width.unwrap_or(0.0)
                ),
                (None, None) => writeln!(out, "  trial {:>3} seed {:>20}  {verdict}", r.trial, r.seed),
            }
            .unwrap();
        }
        let a = &self.aggregate;
        writeln!(
            out,
            "  {}/{} trials passed ({:.3}); contract {:.3} needs {}: {}",
            a.successes,
            self.trials,
            a.success_fraction,
            a.contract,
            a.required_successes,
            if a.met { "met" } else { "NOT met" }
        )
        .unwrap();
        out
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
