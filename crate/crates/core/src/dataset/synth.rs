//! Synthetic multi-center prosumer data.
//!
//! Each center has its own irradiance climate (peak amplitude and
//! cloudiness) and a household consumption archetype. Irradiance is shared
//! by every prosumer of a center; PV follows GHI scaled by a per-prosumer
//! panel size, and net load is consumption minus PV.

use std::f64::consts::PI;

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::series::{ProsumerSeries, SLOTS_PER_DAY};
use crate::error::{Error, Result};
use crate::seed::{rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumptionArchetype {
    /// Low daytime use, strong evening peak.
    EveningPeak,
    /// Breakfast and dinner peaks.
    MorningEvening,
    /// Occupied through the day.
    DaytimeHome,
    /// Overnight loads such as off-peak water heating.
    NightHeavy,
    Flat,
}

impl ConsumptionArchetype {
    /// Mean demand in kW at `hour` (0..24).
    fn kw(self, hour: f64) -> f64 {
        let bump = |center: f64, width: f64, height: f64| height * (-((hour - center) / width).powi(2) / 2.0).exp();
        match self {
            Self::EveningPeak => 0.25 + bump(19.0, 1.5, 1.6) + bump(7.5, 1.0, 0.3),
            Self::MorningEvening => 0.3 + bump(7.5, 1.2, 1.1) + bump(18.5, 1.8, 1.2),
            Self::DaytimeHome => 0.35 + bump(12.5, 3.0, 0.9) + bump(19.0, 2.0, 0.7),
            Self::NightHeavy => 0.3 + bump(1.5, 1.5, 1.5) + bump(19.5, 1.5, 0.6),
            Self::Flat => 0.6 + bump(18.0, 4.0, 0.2),
        }
    }
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 7, 1).expect("valid date")
}

fn default_panel_kw() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn default_variability() -> f64 {
    0.1
}

fn default_pv_noise() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCenter {
    pub id: String,
    pub prosumers: usize,
    /// Overrides [`SynthConfig::days`] for this center (quantity skew).
    #[serde(default)]
    pub days: Option<usize>,
    /// Multiplier on clear-sky irradiance.
    #[serde(default = "one")]
    pub irradiance_amplitude: f64,
    /// Spread of daily clearness; 0 is always clear sky.
    #[serde(default)]
    pub cloudiness: f64,
    /// Relative within-day irradiance fluctuation.
    #[serde(default = "default_variability")]
    pub variability: f64,
    pub archetype: ConsumptionArchetype,
    #[serde(default = "one")]
    pub consumption_scale: f64,
    /// Mean installed PV capacity in kW.
    #[serde(default = "default_panel_kw")]
    pub panel_kw: f64,
    /// Relative noise on PV output.
    #[serde(default = "default_pv_noise")]
    pub pv_noise: f64,
    /// Spread of slowly varying site weather around the regional
    /// irradiance; 0 means every panel sees the regional record.
    #[serde(default)]
    pub site_weather: f64,
    /// Half-width of per-prosumer panel orientation; positive tilts
    /// output toward the afternoon.
    #[serde(default)]
    pub orientation_spread: f64,
}

impl SynthCenter {
    /// A center with default irradiance, noise and capacity settings.
    pub fn new(id: impl Into<String>, prosumers: usize, archetype: ConsumptionArchetype) -> Self {
        Self {
            id: id.into(),
            prosumers,
            days: None,
            irradiance_amplitude: 1.0,
            cloudiness: 0.0,
            variability: default_variability(),
            archetype,
            consumption_scale: 1.0,
            panel_kw: default_panel_kw(),
            pv_noise: default_pv_noise(),
            site_weather: 0.0,
            orientation_spread: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    pub centers: Vec<SynthCenter>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Config("synthetic config has no centers".into()));
        }
        if self.days == 0 {
            return Err(Error::Config("days must be positive".into()));
        }
        for c in &self.centers {
            if c.prosumers == 0 {
                return Err(Error::Config(format!("center {}: prosumers must be positive", c.id)));
            }
            if c.days == Some(0) {
                return Err(Error::Config(format!("center {}: days must be positive", c.id)));
            }
            let params = [
                ("irradiance_amplitude", c.irradiance_amplitude),
                ("consumption_scale", c.consumption_scale),
                ("panel_kw", c.panel_kw),
            ];
            for (name, v) in params {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("center {}: {name} must be positive", c.id)));
                }
            }
            let spreads = [
                ("cloudiness", c.cloudiness),
                ("variability", c.variability),
                ("pv_noise", c.pv_noise),
                ("site_weather", c.site_weather),
                ("orientation_spread", c.orientation_spread),
            ];
            for (name, v) in spreads {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!("center {}: {name} must be non-negative", c.id)));
                }
            }
        }
        Ok(())
    }
}

/// Sun elevation proxy in [0, 1]; zero outside 06:00–18:00.
fn solar_shape(slot: usize) -> f64 {
    let hour = (slot as f64 + 0.5) / 2.0;
    if hour <= 6.0 || hour >= 18.0 {
        0.0
    } else {
        (PI * (hour - 6.0) / 12.0).sin()
    }
}

/// Daily `[dhi, dni, ghi]` arrays for one center.
fn center_irradiance(c: &SynthCenter, days: usize, rng: &mut ChaCha8Rng) -> [Vec<f64>; 3] {
    let std: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
    let n = days * SLOTS_PER_DAY;
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
    for _ in 0..days {
        let clearness = (0.95 - c.cloudiness * std.sample(rng).abs()).clamp(0.1, 1.0);
        for t in 0..SLOTS_PER_DAY {
            let wobble = (1.0 + c.variability * std.sample(rng)).clamp(0.3, 1.5);
            let s = solar_shape(t);
            let (dhi, dni, ghi) = if s > 0.0 {
                let ghi = c.irradiance_amplitude * 1000.0 * s.powf(1.2) * clearness * wobble;
                let dni = c.irradiance_amplitude * 850.0 * s.powf(0.6) * clearness * clearness * wobble;
                let dhi = c.irradiance_amplitude * 1000.0 * s.powf(1.2) * (0.12 + 0.35 * (1.0 - clearness)) * wobble;
                (dhi, dni, ghi)
            } else {
                (0.0, 0.0, 0.0)
            };
            out[0].push(dhi);
            out[1].push(dni);
            out[2].push(ghi);
        }
    }
    out
}

pub fn synthesize(config: &SynthConfig, seed: u64) -> Result<Vec<ProsumerSeries>> {
    config.validate()?;
    let std: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for c in &config.centers {
        let days = c.days.unwrap_or(config.days);
        let center_tag = tag(&c.id);
        let mut climate_rng = rng_for(seed, &[center_tag, 0]);
        let [dhi, dni, ghi] = center_irradiance(c, days, &mut climate_rng);

        for j in 0..c.prosumers {
            let mut rng = rng_for(seed, &[center_tag, 1 + j as u64]);
            let capacity = c.panel_kw * rng.random_range(0.6..1.4);
            let efficiency = rng.random_range(0.75..0.9);
            let load_scale = c.consumption_scale * rng.random_range(0.6..1.4);
            // Individual habits shift the archetype by up to an hour.
            let shift = rng.random_range(-1.0..1.0);
            let orientation = c.orientation_spread * rng.random_range(-1.0..1.0);
            // AR(1) deviation of the site's sky from the regional record.
            let mut site = 0.0;

            let n = days * SLOTS_PER_DAY;
            let mut pv = Vec::with_capacity(n);
            let mut consumption = Vec::with_capacity(n);
            for d in 0..days {
                let day_factor = rng.random_range(0.85..1.15);
                for t in 0..SLOTS_PER_DAY {
                    let i = d * SLOTS_PER_DAY + t;
                    let g = ghi[i];
                    site = 0.9 * site + c.site_weather * 0.44 * std.sample(&mut rng);
                    let p = if g > 0.0 {
                        let hour = (t as f64 + 0.5) / 2.0;
                        let facing = (1.0 + orientation * (hour - 12.0) / 6.0).max(0.0);
                        let sky = (1.0 + site).clamp(0.2, 1.5);
                        let noisy = capacity
                            * 0.5
                            * (g / 1000.0)
                            * efficiency
                            * facing
                            * sky
                            * (1.0 + c.pv_noise * std.sample(&mut rng));
                        noisy.max(0.0)
                    } else {
                        0.0
                    };
                    pv.push(p);
                    let hour = ((t as f64 + 0.5) / 2.0 + shift).rem_euclid(24.0);
                    let noise = (0.2 * std.sample(&mut rng)).exp();
                    consumption.push(0.5 * c.archetype.kw(hour) * load_scale * day_factor * noise);
                }
            }
            let net_load = consumption.iter().zip(&pv).map(|(a, p)| a - p).collect();
            let series = ProsumerSeries {
                prosumer_id: format!("{}-p{:03}", c.id, j),
                center_id: c.id.clone(),
                start_date: config.start_date,
                days,
                net_load,
                pv_generation: pv,
                actual_consumption: Some(consumption),
                dhi: dhi.clone(),
                dni: dni.clone(),
                ghi: ghi.clone(),
            };
            series.validate()?;
            out.push(series);
        }
    }
    Ok(out)
}
