use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use pvfl_core::dataset::{make_windows, ProsumerSeries, SLOTS_PER_DAY};
use pvfl_core::federation::{Federation, FederationConfig, FederationSnapshot, Strategy};
use pvfl_core::model::{checkpoint, predict, ModelParams};

use crate::data;
use crate::report::{
    read_json, strategy_result, write_json, write_round_log, CenterInfo, NewCenterInfo, OnboardReport, Report,
    ONBOARD_FORMAT, REPORT_FORMAT,
};
use crate::spec::{ExperimentSpec, NewCenterSpec};

pub const REPORT_FILE: &str = "report.json";
pub const ROUND_LOG_FILE: &str = "round_log.csv";
pub const ONBOARD_REPORT_FILE: &str = "onboard_report.json";
pub const ONBOARD_LOG_FILE: &str = "onboard_log.csv";

fn federation_config(spec: &ExperimentSpec, strategy: Strategy) -> FederationConfig {
    FederationConfig {
        lambda: spec.pfl.lambda,
        split: spec.pfl.split,
        recent_days: spec.pfl.recent_days,
        ..FederationConfig::new(strategy, spec.seed)
    }
}

fn state_path(out: &Path, strategy: Strategy) -> PathBuf {
    out.join("state").join(format!("{}.json", strategy.name()))
}

fn checkpoint_dir(out: &Path, strategy: Strategy) -> PathBuf {
    out.join("checkpoints").join(strategy.name())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create directory {}", path.display()))
}

/// Saves the model each center is scored with.
fn save_checkpoints(fed: &Federation, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for c in &fed.clients {
        let model = fed.evaluation_model(&c.center_id)?;
        let path = dir.join(format!("{}.json", c.center_id));
        checkpoint::save(&model, &path).with_context(|| format!("cannot save {}", path.display()))?;
    }
    Ok(())
}

/// Runs every requested strategy and writes the round log, report,
/// checkpoints and resumable state under `out`.
pub fn cmd_run(spec: &ExperimentSpec, out: &Path) -> Result<Report> {
    spec.validate()?;
    let data = data::load(spec)?;
    create_dir(out)?;
    create_dir(&out.join("state"))?;

    let mut records = Vec::new();
    let mut strategies = Vec::new();
    for strategy in spec.strategy.strategies() {
        log::info!("running {strategy} for {} rounds", spec.rounds);
        let mut fed = Federation::new(&spec.model, federation_config(spec, strategy), data.centers.clone())?;
        for _ in 0..spec.rounds {
            let rec = fed.run_round()?;
            log::info!(
                "{strategy} round {}: mean MAE {:.4} ({:?})",
                rec.round,
                rec.mean_mae(),
                rec.wall_time
            );
        }
        let evals = fed.evaluate()?;
        strategies.push(strategy_result(&fed, &evals));
        save_checkpoints(&fed, &checkpoint_dir(out, strategy))?;
        write_json(&state_path(out, strategy), &fed.snapshot())?;
        records.extend(fed.records);
    }
    write_round_log(&out.join(ROUND_LOG_FILE), &records)?;

    let report = Report {
        format: REPORT_FORMAT.into(),
        spec: spec.clone(),
        centers: data
            .centers
            .iter()
            .map(|c| CenterInfo {
                center: c.center_id.clone(),
                train_samples: c.train.len(),
                test_samples: c.test.len(),
            })
            .collect(),
        strategies,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

pub fn load_report(run_dir: &Path) -> Result<Report> {
    let report: Report = read_json(&run_dir.join(REPORT_FILE))?;
    if report.format != REPORT_FORMAT {
        bail!("{} is not a run report", run_dir.join(REPORT_FILE).display());
    }
    Ok(report)
}

/// Half-hourly ground truth and per-strategy estimates for one prosumer
/// over an inclusive date range.
#[derive(Debug)]
pub struct Trace {
    pub strategies: Vec<Strategy>,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug)]
pub struct TraceRow {
    pub date: NaiveDate,
    pub slot: usize,
    pub y_true: f64,
    pub predictions: Vec<f64>,
}

pub fn cmd_trace(
    run_dir: &Path,
    prosumer: &str,
    from: NaiveDate,
    to: NaiveDate,
    strategies: Option<Vec<Strategy>>,
) -> Result<Trace> {
    if to < from {
        bail!("date range is empty: {from} is after {to}");
    }
    let report = load_report(run_dir)?;
    let strategies = strategies.unwrap_or_else(|| report.strategies.iter().map(|s| s.strategy).collect());
    let data = data::load(&report.spec)?;
    let series = data
        .series
        .iter()
        .find(|s| s.prosumer_id == prosumer)
        .ok_or_else(|| anyhow!("unknown prosumer {prosumer:?}"))?;
    let center = data
        .center(&series.center_id)
        .ok_or_else(|| anyhow!("prosumer {prosumer} has no prepared center"))?;

    let mut models: Vec<ModelParams> = Vec::with_capacity(strategies.len());
    for &s in &strategies {
        let path = checkpoint_dir(run_dir, s).join(format!("{}.json", series.center_id));
        if !path.exists() {
            bail!("missing checkpoint {}", path.display());
        }
        models.push(checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?);
    }

    let windows = make_windows(series, report.spec.model.window_days)?;
    let mut rows = Vec::new();
    let mut date = from;
    while date <= to {
        let day = series
            .day_index(date)
            .ok_or_else(|| anyhow!("{date} is outside the data of prosumer {prosumer}"))?;
        let window = windows.iter().find(|w| w.target_date == date).ok_or_else(|| {
            anyhow!(
                "{date} lacks the {} days of history a window needs",
                report.spec.model.window_days
            )
        })?;
        let input = center.stats.normalize(window).input;
        let mut preds = Vec::with_capacity(models.len());
        for m in &models {
            let (y, _) = predict(m, &input)?;
            preds.push(
                y.into_iter()
                    .map(|v| center.stats.denormalize_pv(v))
                    .collect::<Vec<_>>(),
            );
        }
        let truth = ProsumerSeries::day_slice(&series.pv_generation, day);
        for slot in 0..SLOTS_PER_DAY {
            rows.push(TraceRow {
                date,
                slot,
                y_true: truth[slot],
                predictions: preds.iter().map(|p| p[slot]).collect(),
            });
        }
        date = date.succ_opt().ok_or_else(|| anyhow!("date overflow"))?;
    }
    Ok(Trace { strategies, rows })
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header = vec!["date".to_string(), "slot".into(), "y_true".into()];
    header.extend(trace.strategies.iter().map(|s| format!("pred_{}", s.name())));
    w.write_record(&header)?;
    for r in &trace.rows {
        let mut rec = vec![r.date.to_string(), r.slot.to_string(), r.y_true.to_string()];
        rec.extend(r.predictions.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Adds a new center to every strategy of a finished run and continues
/// for `rounds` more rounds. Results go to `out`.
pub fn cmd_onboard(run_dir: &Path, new_center: &NewCenterSpec, rounds: usize, out: &Path) -> Result<OnboardReport> {
    let report = load_report(run_dir)?;
    let spec = &report.spec;
    let existing = data::load(spec)?;
    if existing.center(new_center.center_id()).is_some() {
        bail!("center {} already takes part in the run", new_center.center_id());
    }
    let joining = data::load_new_center(spec, new_center)?;
    let new_data = joining
        .centers
        .into_iter()
        .next()
        .ok_or_else(|| anyhow!("new center {} has no data", new_center.center_id()))?;

    create_dir(out)?;
    let mut strategies = Vec::new();
    let mut records = Vec::new();
    for s in &report.strategies {
        let path = state_path(run_dir, s.strategy);
        if !path.exists() {
            bail!("missing run state {}", path.display());
        }
        let snapshot: FederationSnapshot = read_json(&path)?;
        let mut fed = Federation::restore(snapshot, &existing.centers)?;
        fed.add_center(new_data.clone())?;
        for _ in 0..rounds {
            let rec = fed.run_round()?;
            log::info!(
                "{} onboarding round {}: mean MAE {:.4}",
                s.strategy,
                rec.round,
                rec.mean_mae()
            );
        }
        let evals = fed.evaluate()?;
        strategies.push(strategy_result(&fed, &evals));
        save_checkpoints(&fed, &checkpoint_dir(out, s.strategy))?;
        records.extend(fed.records);
    }
    write_round_log(&out.join(ONBOARD_LOG_FILE), &records)?;

    let mean_existing =
        existing.centers.iter().map(|c| c.volume()).sum::<usize>() as f64 / existing.centers.len() as f64;
    let total = existing.centers.iter().map(|c| c.volume()).sum::<usize>() + new_data.volume();
    let onboard = OnboardReport {
        format: ONBOARD_FORMAT.into(),
        spec: spec.clone(),
        new_center: NewCenterInfo {
            center: new_data.center_id.clone(),
            train_samples: new_data.train.len(),
            test_samples: new_data.test.len(),
            volume_ratio: new_data.volume() as f64 / mean_existing,
            aggregation_weight: new_data.volume() as f64 / total as f64,
        },
        rounds,
        strategies,
    };
    write_json(&out.join(ONBOARD_REPORT_FILE), &onboard)?;
    Ok(onboard)
}
