use std::path::Path;

use anyhow::{Context, Result};
use pvfl_core::federation::{Federation, RoundRecord, Strategy};
use pvfl_core::metrics::{CenterEval, EvalResult};
use serde::{Deserialize, Serialize};

use crate::spec::ExperimentSpec;

pub const REPORT_FORMAT: &str = "pvfl-report";
pub const ONBOARD_FORMAT: &str = "pvfl-onboard-report";

pub const ROUND_LOG_HEADER: [&str; 11] = [
    "strategy",
    "round",
    "center",
    "lambda",
    "train_loss",
    "mae",
    "rmse",
    "r2",
    "mae_clipped",
    "rmse_clipped",
    "r2_clipped",
];

/// Appends one row per (round, center) to a CSV writer.
pub fn write_round_rows<W: std::io::Write>(w: &mut csv::Writer<W>, records: &[RoundRecord]) -> Result<()> {
    for r in records {
        for c in &r.centers {
            w.write_record([
                r.strategy.name().to_string(),
                r.round.to_string(),
                c.center_id.clone(),
                c.lambda.map(|l| l.to_string()).unwrap_or_default(),
                c.train_loss.to_string(),
                c.eval.raw.mae.to_string(),
                c.eval.raw.rmse.to_string(),
                c.eval.raw.r2.to_string(),
                c.eval.clipped.mae.to_string(),
                c.eval.clipped.rmse.to_string(),
                c.eval.clipped.r2.to_string(),
            ])?;
        }
    }
    Ok(())
}

pub fn write_round_log(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(ROUND_LOG_HEADER)?;
    write_round_rows(&mut w, records)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterInfo {
    pub center: String,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterResult {
    pub center: String,
    pub raw: EvalResult,
    pub clipped: EvalResult,
    pub lambda: Option<f64>,
    pub train_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

impl MeanMetrics {
    fn of<'a>(evals: impl Iterator<Item = &'a EvalResult>) -> Self {
        let (mut mae, mut rmse, mut r2, mut n) = (0.0, 0.0, 0.0, 0usize);
        for e in evals {
            mae += e.mae;
            rmse += e.rmse;
            r2 += e.r2;
            n += 1;
        }
        let n = n.max(1) as f64;
        Self {
            mae: mae / n,
            rmse: rmse / n,
            r2: r2 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub centers: Vec<CenterResult>,
    pub mean: MeanMetrics,
    pub mean_clipped: MeanMetrics,
}

impl StrategyResult {
    pub fn center(&self, id: &str) -> Option<&CenterResult> {
        self.centers.iter().find(|c| c.center == id)
    }
}

/// Results of a federation after its last round (or current state).
pub fn strategy_result(fed: &Federation, evals: &[(String, CenterEval)]) -> StrategyResult {
    let last = fed.records.last();
    let centers: Vec<CenterResult> = evals
        .iter()
        .map(|(id, e)| {
            let rec = last.and_then(|r| r.center(id));
            CenterResult {
                center: id.clone(),
                raw: e.raw,
                clipped: e.clipped,
                lambda: rec.and_then(|c| c.lambda),
                train_loss: rec.map(|c| c.train_loss),
            }
        })
        .collect();
    StrategyResult {
        strategy: fed.strategy(),
        mean: MeanMetrics::of(centers.iter().map(|c| &c.raw)),
        mean_clipped: MeanMetrics::of(centers.iter().map(|c| &c.clipped)),
        centers,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub spec: ExperimentSpec,
    pub centers: Vec<CenterInfo>,
    pub strategies: Vec<StrategyResult>,
}

impl Report {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyResult> {
        self.strategies.iter().find(|r| r.strategy == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewCenterInfo {
    pub center: String,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Training volume relative to the mean of the existing centers.
    pub volume_ratio: f64,
    /// Weight in server aggregation once it has joined.
    pub aggregation_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnboardReport {
    pub format: String,
    pub spec: ExperimentSpec,
    pub new_center: NewCenterInfo,
    pub rounds: usize,
    pub strategies: Vec<StrategyResult>,
}

impl OnboardReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyResult> {
        self.strategies.iter().find(|r| r.strategy == s)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}
