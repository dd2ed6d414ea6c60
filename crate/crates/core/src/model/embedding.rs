use std::collections::BTreeSet;

use chrono::Days;
use serde::{Deserialize, Serialize};

use super::network::predict;
use super::params::ModelParams;
use crate::dataset::{Variate, WindowSample};
use crate::error::{Error, Result};
use crate::numeric::{dot, norm};

/// Recent-days window for the PV-condition embedding.
pub const DEFAULT_RECENT_DAYS: usize = 7;

/// Averaged final-block DHI, DNI and GHI representations (`3·d_emb` values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrradianceEmbedding(pub Vec<f64>);

impl IrradianceEmbedding {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }
}

/// Samples whose target date falls in the last `recent_days` distinct
/// calendar days of `samples`.
pub fn recent_samples(samples: &[WindowSample], recent_days: usize) -> Vec<&WindowSample> {
    let Some(latest) = samples.iter().map(|s| s.target_date).max() else {
        return Vec::new();
    };
    let Some(first) = recent_days
        .checked_sub(1)
        .and_then(|back| latest.checked_sub_days(Days::new(back as u64)))
    else {
        return Vec::new();
    };
    samples
        .iter()
        .filter(|s| s.target_date >= first && s.target_date <= latest)
        .collect()
}

/// Uniform average over qualifying (prosumer, day) samples of the
/// concatenated `[DHI, DNI, GHI]` rows of the final hidden state.
pub fn pv_condition_embedding(
    params: &ModelParams,
    samples: &[WindowSample],
    recent_days: usize,
) -> Result<IrradianceEmbedding> {
    let chosen = recent_samples(samples, recent_days);
    if chosen.is_empty() {
        return Err(Error::Contract(format!(
            "no samples within the most recent {recent_days} target days"
        )));
    }
    let d = params.config.d_emb;
    let mut acc = vec![0.0; 3 * d];
    let mut seen = BTreeSet::new();
    let mut count = 0usize;
    for s in chosen {
        // One contribution per (prosumer, day).
        if !seen.insert((s.prosumer_id.as_str(), s.target_date)) {
            continue;
        }
        let (_, hidden) = predict(params, &s.input)?;
        for (k, v) in [Variate::Dhi, Variate::Dni, Variate::Ghi].into_iter().enumerate() {
            for (a, h) in acc[k * d..(k + 1) * d].iter_mut().zip(hidden.row(v.row())) {
                *a += h;
            }
        }
        count += 1;
    }
    for a in &mut acc {
        *a /= count as f64;
    }
    Ok(IrradianceEmbedding(acc))
}
