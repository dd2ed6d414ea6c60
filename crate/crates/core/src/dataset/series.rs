use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-hour slots per day.
pub const SLOTS_PER_DAY: usize = 48;

/// Tolerance for the net = consumption − PV identity, in kWh.
pub const NET_LOAD_TOLERANCE: f64 = 1e-6;

/// Model input variates, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variate {
    Net,
    Dhi,
    Dni,
    Ghi,
}

impl Variate {
    pub const ALL: [Variate; 4] = [Variate::Net, Variate::Dhi, Variate::Dni, Variate::Ghi];

    pub fn row(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variate::Net => "net",
            Variate::Dhi => "dhi",
            Variate::Dni => "dni",
            Variate::Ghi => "ghi",
        }
    }
}

/// Aligned half-hourly history of one prosumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsumerSeries {
    pub prosumer_id: String,
    pub center_id: String,
    pub start_date: NaiveDate,
    pub days: usize,
    /// kWh per slot.
    pub net_load: Vec<f64>,
    /// kWh per slot.
    pub pv_generation: Vec<f64>,
    /// kWh per slot, when the meter reports gross consumption.
    pub actual_consumption: Option<Vec<f64>>,
    /// W/m².
    pub dhi: Vec<f64>,
    pub dni: Vec<f64>,
    pub ghi: Vec<f64>,
}

impl ProsumerSeries {
    pub fn validate(&self) -> Result<()> {
        let n = self.days * SLOTS_PER_DAY;
        let lens = [
            ("net_load", self.net_load.len()),
            ("pv_generation", self.pv_generation.len()),
            ("dhi", self.dhi.len()),
            ("dni", self.dni.len()),
            ("ghi", self.ghi.len()),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(Error::Validation(format!(
                    "prosumer {}: {name} has {len} values, expected {n}",
                    self.prosumer_id
                )));
            }
        }
        if let Some(c) = &self.actual_consumption {
            if c.len() != n {
                return Err(Error::Validation(format!(
                    "prosumer {}: actual_consumption has {} values, expected {n}",
                    self.prosumer_id,
                    c.len()
                )));
            }
            for (i, ((net, act), pv)) in self.net_load.iter().zip(c).zip(&self.pv_generation).enumerate() {
                if (net - (act - pv)).abs() > NET_LOAD_TOLERANCE {
                    return Err(Error::Validation(format!(
                        "prosumer {} {} slot {}: net load {net} != consumption {act} - pv {pv}",
                        self.prosumer_id,
                        self.date(i / SLOTS_PER_DAY),
                        i % SLOTS_PER_DAY
                    )));
                }
            }
        }
        if let Some(i) = self.pv_generation.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::Validation(format!(
                "prosumer {} {}: negative pv generation {}",
                self.prosumer_id,
                self.date(i / SLOTS_PER_DAY),
                self.pv_generation[i]
            )));
        }
        for (name, vals) in [("dhi", &self.dhi), ("dni", &self.dni), ("ghi", &self.ghi)] {
            if let Some(i) = vals.iter().position(|&v| !(v >= 0.0)) {
                return Err(Error::Validation(format!(
                    "prosumer {} {}: negative {name} {}",
                    self.prosumer_id,
                    self.date(i / SLOTS_PER_DAY),
                    vals[i]
                )));
            }
        }
        Ok(())
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + Days::new(day as u64)
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.days).then_some(offset as usize)
    }

    pub fn variate(&self, v: Variate) -> &[f64] {
        match v {
            Variate::Net => &self.net_load,
            Variate::Dhi => &self.dhi,
            Variate::Dni => &self.dni,
            Variate::Ghi => &self.ghi,
        }
    }

    pub fn day_slice(values: &[f64], day: usize) -> &[f64] {
        &values[day * SLOTS_PER_DAY..(day + 1) * SLOTS_PER_DAY]
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Simple deterministic series for unit tests.
    pub fn series(id: &str, center: &str, days: usize) -> ProsumerSeries {
        let n = days * SLOTS_PER_DAY;
        let mut pv = Vec::with_capacity(n);
        let mut cons = Vec::with_capacity(n);
        let mut ghi = Vec::with_capacity(n);
        for i in 0..n {
            let slot = i % SLOTS_PER_DAY;
            let day = i / SLOTS_PER_DAY;
            let sun = if (12..36).contains(&slot) {
                ((slot - 12) as f64 * std::f64::consts::PI / 24.0).sin()
            } else {
                0.0
            };
            let g = 800.0 * sun * (0.7 + 0.3 * ((day % 3) as f64 / 2.0));
            ghi.push(g);
            pv.push(g / 1000.0 * 0.9);
            cons.push(0.3 + 0.2 * ((slot as f64) / 8.0).sin().abs() + 0.01 * day as f64);
        }
        let net = cons.iter().zip(&pv).map(|(c, p)| c - p).collect();
        ProsumerSeries {
            prosumer_id: id.to_string(),
            center_id: center.to_string(),
            start_date: NaiveDate::from_ymd_opt(2012, 7, 1).unwrap(),
            days,
            net_load: net,
            pv_generation: pv,
            actual_consumption: Some(cons),
            dhi: ghi.iter().map(|g| 0.3 * g).collect(),
            dni: ghi.iter().map(|g| 1.1 * g).collect(),
            ghi,
        }
    }
}
