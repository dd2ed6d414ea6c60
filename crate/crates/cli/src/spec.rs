use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pvfl_core::dataset::{SynthCenter, SynthConfig};
use pvfl_core::federation::{LambdaMode, Strategy};
use pvfl_core::model::{ModelConfig, SplitPolicy, DEFAULT_RECENT_DAYS};
use serde::{Deserialize, Serialize};

/// One experiment: where the data comes from, the model, the strategies
/// to compare and the seed everything is derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub data: DataSource,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub strategy: StrategyChoice,
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub pfl: PflOptions,
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Meter readings in the GC/GG long format.
    pub meter: PathBuf,
    /// Prosumer → center, in center order.
    pub assignment: Vec<AssignmentEntry>,
    /// One irradiance file per center.
    pub irradiance: Vec<CenterIrradiance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentEntry {
    pub prosumer: String,
    pub center: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterIrradiance {
    pub center: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    Pfl,
    Fedavg,
    Local,
    #[default]
    All,
}

impl StrategyChoice {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyChoice::Pfl => vec![Strategy::Pfl],
            StrategyChoice::Fedavg => vec![Strategy::FedAvg],
            StrategyChoice::Local => vec![Strategy::LocalOnly],
            StrategyChoice::All => Strategy::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for StrategyChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pfl" => StrategyChoice::Pfl,
            "fedavg" => StrategyChoice::Fedavg,
            "local" => StrategyChoice::Local,
            "all" => StrategyChoice::All,
            other => bail!("unknown strategy {other:?} (expected pfl, fedavg, local or all)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PflOptions {
    #[serde(default)]
    pub lambda: LambdaMode,
    #[serde(default)]
    pub split: SplitPolicy,
    #[serde(default = "default_recent_days")]
    pub recent_days: usize,
}

fn default_recent_days() -> usize {
    DEFAULT_RECENT_DAYS
}

impl Default for PflOptions {
    fn default() -> Self {
        Self {
            lambda: LambdaMode::Adaptive,
            split: SplitPolicy::OutputHead,
            recent_days: DEFAULT_RECENT_DAYS,
        }
    }
}

/// A center joining after the initial rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NewCenterSpec {
    Synthetic(SynthCenter),
    Csv(NewCsvCenter),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewCsvCenter {
    pub center: String,
    pub meter: PathBuf,
    pub irradiance: PathBuf,
}

impl NewCenterSpec {
    pub fn center_id(&self) -> &str {
        match self {
            NewCenterSpec::Synthetic(c) => &c.id,
            NewCenterSpec::Csv(c) => &c.center,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {what} {}", path.display()))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

impl ExperimentSpec {
    /// Reads a spec; relative CSV paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec: Self = read_json(path, "experiment spec")?;
        spec.resolve_paths(base_dir(path));
        Ok(spec)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataSource::Csv(c) = &mut self.data {
            resolve(base, &mut c.meter);
            for i in &mut c.irradiance {
                resolve(base, &mut i.path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.rounds == 0 {
            bail!("rounds must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction must lie strictly between 0 and 1");
        }
        if self.pfl.recent_days == 0 {
            bail!("pfl.recent_days must be positive");
        }
        match &self.data {
            DataSource::Synthetic(s) => s.validate()?,
            DataSource::Csv(c) => {
                if c.assignment.is_empty() {
                    bail!("csv data source has an empty assignment");
                }
                for a in &c.assignment {
                    if !c.irradiance.iter().any(|i| i.center == a.center) {
                        bail!("center {} has no irradiance file", a.center);
                    }
                }
            }
        }
        Ok(())
    }
}

impl NewCenterSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec: Self = read_json(path, "new-center spec")?;
        if let NewCenterSpec::Csv(c) = &mut spec {
            let base = base_dir(path);
            resolve(base, &mut c.meter);
            resolve(base, &mut c.irradiance);
        }
        Ok(spec)
    }
}
