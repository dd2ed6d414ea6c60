//! MAE, RMSE and R² over pooled half-hourly PV estimates.

use serde::{Deserialize, Serialize};

use crate::dataset::{NormStats, WindowSample};
use crate::error::{Error, Result};
use crate::model::{predict, ModelParams};

fn check(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::Contract(format!(
            "metric inputs differ in length: {} targets vs {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Contract("metric inputs are empty".into()));
    }
    Ok(())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// `1 − SS_res / SS_tot`.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub n_samples: usize,
}

impl EvalResult {
    pub fn from_pairs(y: &[f64], y_hat: &[f64], n_samples: usize) -> Result<Self> {
        Ok(Self {
            mae: mae(y, y_hat)?,
            rmse: rmse(y, y_hat)?,
            r2: r2(y, y_hat)?,
            n_samples,
        })
    }
}

/// Raw and non-negative-clipped metrics of one model on one test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterEval {
    pub raw: EvalResult,
    pub clipped: EvalResult,
}

/// Pooled (truth, prediction) pairs in kWh for a normalized test split.
pub fn denormalized_pairs(
    model: &ModelParams,
    test: &[WindowSample],
    stats: &NormStats,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if test.is_empty() {
        return Err(Error::Contract("evaluation needs a non-empty test split".into()));
    }
    let mut y = Vec::with_capacity(test.len() * 48);
    let mut y_hat = Vec::with_capacity(test.len() * 48);
    for s in test {
        let (pred, _) = predict(model, &s.input)?;
        y.extend(s.target.iter().map(|&v| stats.denormalize_pv(v)));
        y_hat.extend(pred.into_iter().map(|v| stats.denormalize_pv(v)));
    }
    Ok((y, y_hat))
}

pub fn evaluate_center(
    model: &ModelParams,
    test: &[WindowSample],
    stats: &NormStats,
    clip_nonnegative: bool,
) -> Result<EvalResult> {
    let (y, mut y_hat) = denormalized_pairs(model, test, stats)?;
    if clip_nonnegative {
        clip(&mut y_hat);
    }
    EvalResult::from_pairs(&y, &y_hat, test.len())
}

/// Both modes from a single forward pass.
pub fn evaluate_both(model: &ModelParams, test: &[WindowSample], stats: &NormStats) -> Result<CenterEval> {
    let (y, mut y_hat) = denormalized_pairs(model, test, stats)?;
    let raw = EvalResult::from_pairs(&y, &y_hat, test.len())?;
    clip(&mut y_hat);
    let clipped = EvalResult::from_pairs(&y, &y_hat, test.len())?;
    Ok(CenterEval { raw, clipped })
}

fn clip(values: &mut [f64]) {
    for v in values {
        *v = v.max(0.0);
    }
}
