use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::normalize::NormStats;
use super::series::ProsumerSeries;
use super::window::{make_windows, WindowSample};
use crate::error::{Error, Result};

/// A center's raw windowed samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterDataset {
    pub center_id: String,
    pub samples: Vec<WindowSample>,
}

impl CenterDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn prosumers(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.prosumer_id.as_str()).collect()
    }
}

/// Normalized train/test samples of one center plus the fitted statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCenter {
    pub center_id: String,
    pub train: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub stats: NormStats,
}

impl PreparedCenter {
    /// `|D_i|`, the training volume used as the aggregation weight.
    pub fn volume(&self) -> usize {
        self.train.len()
    }
}

/// Prosumer → center mapping, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment(pub Vec<(String, String)>);

impl Assignment {
    /// Each series goes to the center recorded on it.
    pub fn from_series(series: &[ProsumerSeries]) -> Self {
        Self(
            series
                .iter()
                .map(|s| (s.prosumer_id.clone(), s.center_id.clone()))
                .collect(),
        )
    }
}

/// Windows every prosumer and groups the samples by assigned center.
///
/// Centers appear in order of first mention in `assignment`.
pub fn partition_centers(
    series: &[ProsumerSeries],
    assignment: &Assignment,
    window_days: usize,
) -> Result<Vec<CenterDataset>> {
    let mut center_of: HashMap<&str, &str> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (prosumer, center) in &assignment.0 {
        if center_of.insert(prosumer, center).is_some() {
            return Err(Error::Assignment(format!(
                "prosumer {prosumer} is assigned more than once"
            )));
        }
        if !order.contains(&center.as_str()) {
            order.push(center);
        }
    }
    let known: BTreeSet<&str> = series.iter().map(|s| s.prosumer_id.as_str()).collect();
    if let Some((p, _)) = assignment.0.iter().find(|(p, _)| !known.contains(p.as_str())) {
        return Err(Error::Assignment(format!("assigned prosumer {p} has no data")));
    }

    let mut buckets: Vec<Vec<WindowSample>> = vec![Vec::new(); order.len()];
    for s in series {
        let center = center_of
            .get(s.prosumer_id.as_str())
            .ok_or_else(|| Error::Assignment(format!("prosumer {} is not assigned to a center", s.prosumer_id)))?;
        let idx = order.iter().position(|c| c == center).expect("center registered");
        for mut w in make_windows(s, window_days)? {
            w.center_id = center.to_string();
            buckets[idx].push(w);
        }
    }
    Ok(order
        .into_iter()
        .zip(buckets)
        .map(|(c, samples)| CenterDataset {
            center_id: c.to_string(),
            samples,
        })
        .collect())
}

/// Chronological split on target date: the earliest `fraction` of distinct
/// target dates train, the rest test.
pub fn split_train_test(center: &CenterDataset, fraction: f64) -> Result<(CenterDataset, CenterDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let dates: BTreeSet<_> = center.samples.iter().map(|s| s.target_date).collect();
    let dates: Vec<_> = dates.into_iter().collect();
    let n_train = (fraction * dates.len() as f64).round() as usize;
    if n_train == 0 || n_train >= dates.len() {
        return Err(Error::Config(format!(
            "center {}: train fraction {fraction} over {} target days leaves one side empty",
            center.center_id,
            dates.len()
        )));
    }
    let cutoff = dates[n_train];
    let (train, test): (Vec<_>, Vec<_>) = center.samples.iter().cloned().partition(|s| s.target_date < cutoff);
    Ok((
        CenterDataset {
            center_id: center.center_id.clone(),
            samples: train,
        },
        CenterDataset {
            center_id: center.center_id.clone(),
            samples: test,
        },
    ))
}

/// Splits, fits normalization on the training side and applies it to both.
pub fn prepare_center(center: &CenterDataset, train_fraction: f64) -> Result<PreparedCenter> {
    let (train, test) = split_train_test(center, train_fraction)?;
    let stats = NormStats::fit(&train.samples)?;
    Ok(PreparedCenter {
        center_id: center.center_id.clone(),
        train: train.samples.iter().map(|s| stats.normalize(s)).collect(),
        test: test.samples.iter().map(|s| stats.normalize(s)).collect(),
        stats,
    })
}

/// Partitions, splits and normalizes every center.
pub fn prepare_all(
    series: &[ProsumerSeries],
    assignment: &Assignment,
    window_days: usize,
    train_fraction: f64,
) -> Result<Vec<PreparedCenter>> {
    partition_centers(series, assignment, window_days)?
        .iter()
        .map(|c| prepare_center(c, train_fraction))
        .collect()
}
