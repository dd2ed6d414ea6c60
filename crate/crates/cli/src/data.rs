use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use pvfl_core::dataset::{
    attach_irradiance, load_irradiance_csv, load_meter_csv, prepare_all, synthesize, Assignment, PreparedCenter,
    ProsumerSeries, SynthConfig,
};

use crate::spec::{CsvSource, DataSource, ExperimentSpec, NewCenterSpec};

/// Raw per-prosumer series plus the prepared (windowed, split,
/// normalized) center datasets derived from them.
pub struct LoadedData {
    pub series: Vec<ProsumerSeries>,
    pub centers: Vec<Arc<PreparedCenter>>,
}

impl LoadedData {
    pub fn center(&self, id: &str) -> Option<&Arc<PreparedCenter>> {
        self.centers.iter().find(|c| c.center_id == id)
    }
}

fn load_csv(source: &CsvSource) -> Result<(Vec<ProsumerSeries>, Assignment)> {
    let meters = load_meter_csv(&source.meter).with_context(|| format!("loading {}", source.meter.display()))?;
    let mut tables = Vec::with_capacity(source.irradiance.len());
    for i in &source.irradiance {
        let table = load_irradiance_csv(&i.path).with_context(|| format!("loading {}", i.path.display()))?;
        tables.push((i.center.as_str(), table));
    }
    let mut series = Vec::with_capacity(source.assignment.len());
    for a in &source.assignment {
        let meter = meters
            .iter()
            .find(|m| m.prosumer_id == a.prosumer)
            .ok_or_else(|| anyhow!("prosumer {} is not in {}", a.prosumer, source.meter.display()))?;
        let (_, table) = tables
            .iter()
            .find(|(c, _)| *c == a.center)
            .ok_or_else(|| anyhow!("center {} has no irradiance file", a.center))?;
        series.push(attach_irradiance(meter, table, &a.center)?);
    }
    let assignment = Assignment(
        source
            .assignment
            .iter()
            .map(|a| (a.prosumer.clone(), a.center.clone()))
            .collect(),
    );
    Ok((series, assignment))
}

fn prepare(spec: &ExperimentSpec, series: Vec<ProsumerSeries>, assignment: &Assignment) -> Result<LoadedData> {
    let centers = prepare_all(&series, assignment, spec.model.window_days, spec.train_fraction)?
        .into_iter()
        .map(Arc::new)
        .collect();
    Ok(LoadedData { series, centers })
}

pub fn load(spec: &ExperimentSpec) -> Result<LoadedData> {
    let (series, assignment) = match &spec.data {
        DataSource::Synthetic(cfg) => {
            let series = synthesize(cfg, spec.seed)?;
            let assignment = Assignment::from_series(&series);
            (series, assignment)
        }
        DataSource::Csv(source) => load_csv(source)?,
    };
    prepare(spec, series, &assignment)
}

/// Data for a joining center, prepared with the experiment's settings.
pub fn load_new_center(spec: &ExperimentSpec, new: &NewCenterSpec) -> Result<LoadedData> {
    let series = match new {
        NewCenterSpec::Synthetic(center) => {
            let (days, start_date) = match &spec.data {
                DataSource::Synthetic(cfg) => (cfg.days, cfg.start_date),
                DataSource::Csv(_) => (
                    center.days.ok_or_else(|| {
                        anyhow!("a synthetic new center needs `days` when the experiment uses CSV data")
                    })?,
                    chrono::NaiveDate::from_ymd_opt(2012, 7, 1).expect("valid date"),
                ),
            };
            let cfg = SynthConfig {
                days,
                start_date,
                centers: vec![center.clone()],
            };
            synthesize(&cfg, spec.seed)?
        }
        NewCenterSpec::Csv(c) => {
            let meters = load_meter_csv(&c.meter).with_context(|| format!("loading {}", c.meter.display()))?;
            let table =
                load_irradiance_csv(&c.irradiance).with_context(|| format!("loading {}", c.irradiance.display()))?;
            meters
                .iter()
                .map(|m| attach_irradiance(m, &table, &c.center))
                .collect::<pvfl_core::Result<Vec<_>>>()?
        }
    };
    let assignment = Assignment(
        series
            .iter()
            .map(|s| (s.prosumer_id.clone(), new.center_id().to_string()))
            .collect(),
    );
    prepare(spec, series, &assignment)
}
