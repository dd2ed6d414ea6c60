use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::series::{ProsumerSeries, Variate, SLOTS_PER_DAY};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// One training example: a `4 × (window_days·48)` input and the target
/// day's 48 PV values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub prosumer_id: String,
    pub center_id: String,
    /// Zero-based day index of the target day within the prosumer's series.
    pub target_day: usize,
    pub target_date: NaiveDate,
    /// Rows in [`Variate::ALL`] order.
    pub input: Matrix,
    pub target: Vec<f64>,
}

/// One sample per day `d` with at least `window_days − 1` days of history;
/// the window covers days `d − window_days + 1 ..= d`.
pub fn make_windows(series: &ProsumerSeries, window_days: usize) -> Result<Vec<WindowSample>> {
    if window_days == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    if series.days < window_days {
        return Err(Error::InsufficientHistory {
            prosumer: series.prosumer_id.clone(),
            days: series.days,
            window: window_days,
        });
    }
    let width = window_days * SLOTS_PER_DAY;
    let mut out = Vec::with_capacity(series.days - window_days + 1);
    for d in (window_days - 1)..series.days {
        let first = (d + 1 - window_days) * SLOTS_PER_DAY;
        let mut data = Vec::with_capacity(4 * width);
        for v in Variate::ALL {
            data.extend_from_slice(&series.variate(v)[first..first + width]);
        }
        out.push(WindowSample {
            prosumer_id: series.prosumer_id.clone(),
            center_id: series.center_id.clone(),
            target_day: d,
            target_date: series.date(d),
            input: Matrix::new(4, width, data)?,
            target: ProsumerSeries::day_slice(&series.pv_generation, d).to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::series::fixtures::series;

    #[test]
    fn window_count_law() {
        let s = series("p", "c", 10);
        assert_eq!(make_windows(&s, 3).unwrap().len(), 8);
    }

    #[test]
    fn window_content_and_shape() {
        let s = series("p", "c", 5);
        let w = make_windows(&s, 3).unwrap();
        // First sample targets the third day (index 2) and covers days 0..=2.
        let first = &w[0];
        assert_eq!(first.target_day, 2);
        assert_eq!(first.input.shape(), (4, 144));
        assert_eq!(first.target, ProsumerSeries::day_slice(&s.pv_generation, 2));
        assert_eq!(first.input.row(0), &s.net_load[0..144]);
        assert_eq!(first.input.row(1), &s.dhi[0..144]);
        assert_eq!(first.input.row(2), &s.dni[0..144]);
        assert_eq!(first.input.row(3), &s.ghi[0..144]);
    }

    #[test]
    fn insufficient_history() {
        let s = series("p", "c", 2);
        assert!(matches!(
            make_windows(&s, 3),
            Err(Error::InsufficientHistory { days: 2, window: 3, .. })
        ));
    }
}
