use serde::{Deserialize, Serialize};

use super::series::Variate;
use super::window::WindowSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn unscale(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

/// Min-max statistics fitted on a center's training split.
///
/// Inputs are scaled per variate to [0, 1]; PV targets are divided by the
/// training-split PV maximum so zero generation stays zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub variates: [Range; 4],
    pub pv_max: f64,
}

impl NormStats {
    pub fn fit(train: &[WindowSample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Contract(
                "cannot fit normalization on an empty training split".into(),
            ));
        }
        let mut ranges = [Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }; 4];
        let mut pv_max = f64::NEG_INFINITY;
        for s in train {
            for v in Variate::ALL {
                let r = &mut ranges[v.row()];
                for &x in s.input.row(v.row()) {
                    r.min = r.min.min(x);
                    r.max = r.max.max(x);
                }
            }
            pv_max = s.target.iter().copied().fold(pv_max, f64::max);
        }
        for v in Variate::ALL {
            let r = ranges[v.row()];
            if !(r.max > r.min) {
                return Err(Error::ScaleDegenerate {
                    variate: v.name().into(),
                    value: r.min,
                });
            }
        }
        if !(pv_max > 0.0) {
            return Err(Error::ScaleDegenerate {
                variate: "pv".into(),
                value: pv_max,
            });
        }
        Ok(Self {
            variates: ranges,
            pv_max,
        })
    }

    pub fn normalize(&self, sample: &WindowSample) -> WindowSample {
        let mut out = sample.clone();
        for v in Variate::ALL {
            let r = self.variates[v.row()];
            for x in out.input.row_mut(v.row()) {
                *x = r.scale(*x);
            }
        }
        for y in &mut out.target {
            *y /= self.pv_max;
        }
        out
    }

    pub fn denormalize(&self, sample: &WindowSample) -> WindowSample {
        let mut out = sample.clone();
        for v in Variate::ALL {
            let r = self.variates[v.row()];
            for x in out.input.row_mut(v.row()) {
                *x = r.unscale(*x);
            }
        }
        for y in &mut out.target {
            *y = self.denormalize_pv(*y);
        }
        out
    }

    pub fn denormalize_pv(&self, y: f64) -> f64 {
        y * self.pv_max
    }
}
