//! Meter and irradiance CSV ingestion.
//!
//! Meter files carry one row per prosumer, category and day:
//! `prosumer_id,category,date,t00,...,t47`, with category `GC` (gross
//! consumption) or `GG` (gross generation), values in kWh per half hour.
//! Irradiance files carry one row per slot: `date,slot,dhi,dni,ghi` in W/m².

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Days, NaiveDate};
use csv::StringRecord;

use super::series::{ProsumerSeries, SLOTS_PER_DAY};
use crate::error::{Error, Result};

/// Consumption and generation readings for one prosumer over contiguous days.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterSeries {
    pub prosumer_id: String,
    pub start_date: NaiveDate,
    pub days: usize,
    pub consumption: Vec<f64>,
    pub generation: Vec<f64>,
}

impl MeterSeries {
    pub fn net_load(&self) -> Vec<f64> {
        self.consumption
            .iter()
            .zip(&self.generation)
            .map(|(c, g)| c - g)
            .collect()
    }
}

pub fn slot_column(slot: usize) -> String {
    format!("t{slot:02}")
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d/%m/%Y"))
        .map_err(|_| Error::Format(format!("unparseable date {s:?}")))
}

fn column(headers: &StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Format(format!("missing column {name:?}")))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

#[derive(Default)]
struct DayReadings {
    consumption: Option<Vec<f64>>,
    generation: Option<Vec<f64>>,
}

pub fn load_meter_csv(path: impl AsRef<Path>) -> Result<Vec<MeterSeries>> {
    let mut reader = open(path.as_ref())?;
    read_meter(&mut reader)
}

pub fn read_meter<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<Vec<MeterSeries>> {
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, "prosumer_id")?;
    let cat_col = column(&headers, "category")?;
    let date_col = column(&headers, "date")?;
    let slot_cols = (0..SLOTS_PER_DAY)
        .map(|t| column(&headers, &slot_column(t)))
        .collect::<Result<Vec<_>>>()?;

    // Keyed by prosumer, then date; BTreeMap keeps output order stable.
    let mut by_prosumer: BTreeMap<String, BTreeMap<NaiveDate, DayReadings>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let prosumer = record.get(id_col).unwrap_or("").to_string();
        let date_str = record.get(date_col).unwrap_or("");
        let date = parse_date(date_str)?;
        let mut values = Vec::with_capacity(SLOTS_PER_DAY);
        for (t, &c) in slot_cols.iter().enumerate() {
            let cell = record.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(Error::Gap {
                    prosumer,
                    date: date.to_string(),
                    detail: format!("missing half-hour reading {}", slot_column(t)),
                });
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Format(format!(
                    "prosumer {prosumer} {date} {}: not a number: {cell:?}",
                    slot_column(t)
                ))
            })?;
            values.push(v);
        }
        let day = by_prosumer
            .entry(prosumer.clone())
            .or_default()
            .entry(date)
            .or_default();
        let slot = match record.get(cat_col).unwrap_or("").to_ascii_uppercase().as_str() {
            "GC" => &mut day.consumption,
            "GG" => &mut day.generation,
            other => {
                return Err(Error::Format(format!(
                    "prosumer {prosumer} {date}: unknown category {other:?} (expected GC or GG)"
                )))
            }
        };
        if slot.is_some() {
            return Err(Error::Format(format!(
                "prosumer {prosumer} {date}: duplicate row for category"
            )));
        }
        *slot = Some(values);
    }

    let mut out = Vec::with_capacity(by_prosumer.len());
    for (prosumer, days) in by_prosumer {
        let start = *days.keys().next().expect("entry has at least one day");
        let mut consumption = Vec::with_capacity(days.len() * SLOTS_PER_DAY);
        let mut generation = Vec::with_capacity(days.len() * SLOTS_PER_DAY);
        for (i, (date, readings)) in days.into_iter().enumerate() {
            let expected = start + Days::new(i as u64);
            if date != expected {
                return Err(Error::Gap {
                    prosumer,
                    date: expected.to_string(),
                    detail: "no readings for this day".into(),
                });
            }
            let (Some(c), Some(g)) = (readings.consumption, readings.generation) else {
                return Err(Error::Gap {
                    prosumer,
                    date: date.to_string(),
                    detail: "day needs both GC and GG rows".into(),
                });
            };
            consumption.extend(c);
            generation.extend(g);
        }
        out.push(MeterSeries {
            prosumer_id: prosumer,
            start_date: start,
            days: consumption.len() / SLOTS_PER_DAY,
            consumption,
            generation,
        });
    }
    Ok(out)
}

/// Irradiance in W/m² keyed by date; each day holds `[dhi, dni, ghi]` slot arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrradianceTable {
    days: BTreeMap<NaiveDate, [Vec<f64>; 3]>,
}

impl IrradianceTable {
    pub fn len(&self) -> usize {
        self.days.len() * SLOTS_PER_DAY
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn get(&self, date: NaiveDate, slot: usize) -> Option<[f64; 3]> {
        self.days
            .get(&date)
            .map(|[dhi, dni, ghi]| [dhi[slot], dni[slot], ghi[slot]])
    }

    pub fn day(&self, date: NaiveDate) -> Option<&[Vec<f64>; 3]> {
        self.days.get(&date)
    }
}

pub fn load_irradiance_csv(path: impl AsRef<Path>) -> Result<IrradianceTable> {
    let mut reader = open(path.as_ref())?;
    read_irradiance(&mut reader)
}

pub fn read_irradiance<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<IrradianceTable> {
    let headers = reader.headers()?.clone();
    let date_col = column(&headers, "date")?;
    let slot_col = column(&headers, "slot")?;
    let cols = [
        ("dhi", column(&headers, "dhi")?),
        ("dni", column(&headers, "dni")?),
        ("ghi", column(&headers, "ghi")?),
    ];

    let mut partial: BTreeMap<NaiveDate, [Vec<Option<f64>>; 3]> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let date = parse_date(record.get(date_col).unwrap_or(""))?;
        let slot_str = record.get(slot_col).unwrap_or("");
        let slot: usize = slot_str
            .parse()
            .ok()
            .filter(|&s| s < SLOTS_PER_DAY)
            .ok_or_else(|| Error::Format(format!("{date}: slot {slot_str:?} outside 0..47")))?;
        let entry = partial
            .entry(date)
            .or_insert_with(|| std::array::from_fn(|_| vec![None; SLOTS_PER_DAY]));
        for (k, (name, c)) in cols.iter().enumerate() {
            let cell = record.get(*c).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Format(format!("{date} slot {slot}: {name} not a number: {cell:?}")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{date} slot {slot}: {name} = {v} must be a non-negative irradiance"
                )));
            }
            entry[k][slot] = Some(v);
        }
    }

    let mut days = BTreeMap::new();
    for (date, arrays) in partial {
        let mut full: [Vec<f64>; 3] = Default::default();
        for (k, arr) in arrays.into_iter().enumerate() {
            full[k] = arr
                .into_iter()
                .enumerate()
                .map(|(slot, v)| {
                    v.ok_or_else(|| Error::Gap {
                        prosumer: "irradiance".into(),
                        date: date.to_string(),
                        detail: format!("missing slot {slot}"),
                    })
                })
                .collect::<Result<_>>()?;
        }
        days.insert(date, full);
    }
    Ok(IrradianceTable { days })
}

/// Aligns a prosumer's meter data with its region's irradiance.
pub fn attach_irradiance(meter: &MeterSeries, irradiance: &IrradianceTable, center_id: &str) -> Result<ProsumerSeries> {
    let n = meter.days * SLOTS_PER_DAY;
    let (mut dhi, mut dni, mut ghi) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for d in 0..meter.days {
        let date = meter.start_date + Days::new(d as u64);
        let day = irradiance.day(date).ok_or_else(|| Error::Gap {
            prosumer: meter.prosumer_id.clone(),
            date: date.to_string(),
            detail: "no irradiance for this day".into(),
        })?;
        dhi.extend_from_slice(&day[0]);
        dni.extend_from_slice(&day[1]);
        ghi.extend_from_slice(&day[2]);
    }
    let series = ProsumerSeries {
        prosumer_id: meter.prosumer_id.clone(),
        center_id: center_id.to_string(),
        start_date: meter.start_date,
        days: meter.days,
        net_load: meter.net_load(),
        pv_generation: meter.generation.clone(),
        actual_consumption: Some(meter.consumption.clone()),
        dhi,
        dni,
        ghi,
    };
    series.validate()?;
    Ok(series)
}

/// Writes series in the meter CSV layout.
pub fn write_meter_csv<W: std::io::Write>(series: &[ProsumerSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["prosumer_id".to_string(), "category".into(), "date".into()];
    header.extend((0..SLOTS_PER_DAY).map(slot_column));
    w.write_record(&header)?;
    for s in series {
        let consumption = s
            .actual_consumption
            .clone()
            .unwrap_or_else(|| s.net_load.iter().zip(&s.pv_generation).map(|(n, p)| n + p).collect());
        for d in 0..s.days {
            let date = s.date(d).to_string();
            for (cat, vals) in [("GC", &consumption), ("GG", &s.pv_generation)] {
                let mut row = vec![s.prosumer_id.clone(), cat.to_string(), date.clone()];
                row.extend(ProsumerSeries::day_slice(vals, d).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<meter csv>", e))?;
    Ok(())
}

/// Writes one series' irradiance in the irradiance CSV layout.
pub fn write_irradiance_csv<W: std::io::Write>(series: &ProsumerSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "slot", "dhi", "dni", "ghi"])?;
    for d in 0..series.days {
        let date = series.date(d).to_string();
        for t in 0..SLOTS_PER_DAY {
            let i = d * SLOTS_PER_DAY + t;
            w.write_record([
                date.clone(),
                t.to_string(),
                series.dhi[i].to_string(),
                series.dni[i].to_string(),
                series.ghi[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<irradiance csv>", e))?;
    Ok(())
}
