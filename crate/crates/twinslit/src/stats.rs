//! Background subtraction, significance, and run aggregation for the
//! counting experiment.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A background-subtracted coincidence result with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetCounts {
    pub net: f64,
    pub sigma: f64,
}

impl NetCounts {
    /// `net / sigma`; zero when sigma vanishes with a zero net, error when
    /// sigma vanishes with a nonzero net.
    pub fn significance(&self) -> Result<f64> {
        if self.sigma > 0.0 {
            Ok(self.net / self.sigma)
        } else if self.net == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Aggregation(
                "nonzero net counts with zero standard error".into(),
            ))
        }
    }
}

/// Subtracts the delayed-window background estimate from the raw
/// coincidence counts. `window_ratio` is the coincidence-window to
/// background-window duration ratio that rescales the background counts;
/// Poisson errors propagate as `sigma^2 = raw + ratio^2 * background`.
pub fn subtract_background(raw: f64, background: f64, window_ratio: f64) -> Result<NetCounts> {
    if !(raw >= 0.0 && background >= 0.0) {
        return Err(Error::Aggregation(format!(
            "counts must be nonnegative, got raw={raw}, background={background}"
        )));
    }
    if !(window_ratio > 0.0 && window_ratio.is_finite()) {
        return Err(Error::Aggregation(format!(
            "window ratio must be positive, got {window_ratio}"
        )));
    }
    Ok(NetCounts {
        net: raw - window_ratio * background,
        sigma: (raw + window_ratio * window_ratio * background).sqrt(),
    })
}

/// One acquisition run: raw and delayed-window counts over a fixed
/// duration. Counts are `f64` so power-corrected records aggregate exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub duration_s: f64,
    pub raw: f64,
    pub background: f64,
}

/// Totals over a series of runs at the same detector setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub n_runs: usize,
    pub total_duration_s: f64,
    pub raw: f64,
    pub background: f64,
}

/// Sums runs into one series; subtraction then happens on the totals, which
/// is exactly associative (splitting a series and re-aggregating gives the
/// identical result).
pub fn aggregate_runs(runs: &[RunRecord]) -> Result<RunSeries> {
    if runs.is_empty() {
        return Err(Error::Aggregation("no runs to aggregate".into()));
    }
    let mut series = RunSeries {
        n_runs: 0,
        total_duration_s: 0.0,
        raw: 0.0,
        background: 0.0,
    };
    for r in runs {
        if !(r.duration_s > 0.0) {
            return Err(Error::Aggregation(format!(
                "run duration must be positive, got {}",
                r.duration_s
            )));
        }
        if !(r.raw >= 0.0 && r.background >= 0.0) {
            return Err(Error::Aggregation(
                "run counts must be nonnegative".into(),
            ));
        }
        series.n_runs += 1;
        series.total_duration_s += r.duration_s;
        series.raw += r.raw;
        series.background += r.background;
    }
    Ok(series)
}

impl RunSeries {
    pub fn net_counts(&self, window_ratio: f64) -> Result<NetCounts> {
        subtract_background(self.raw, self.background, window_ratio)
    }
}

/// Rescales a run's counts to a reference pump power,
/// `counts * (reference / measured)^exponent`. The exponent is configurable
/// (default 1); pass 2 to correct a pair rate that scales quadratically.
pub fn power_correct(record: RunRecord, measured_power: f64, reference_power: f64, exponent: f64) -> Result<RunRecord> {
    if !(measured_power > 0.0 && reference_power > 0.0) {
        return Err(Error::Aggregation(format!(
            "powers must be positive, got measured={measured_power}, reference={reference_power}"
        )));
    }
    let factor = (reference_power / measured_power).powf(exponent);
    Ok(RunRecord {
        duration_s: record.duration_s,
        raw: record.raw * factor,
        background: record.background * factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn subtraction_and_error_propagation() {
        let n = subtract_background(89.0, 11.0, 1.0).unwrap();
        assert_relative_eq!(n.net, 78.0);
        assert_relative_eq!(n.sigma, 10.0);
        assert_relative_eq!(n.significance().unwrap(), 7.8);
    }

    #[test]
    fn window_ratio_rescales_background() {
        let n = subtract_background(100.0, 40.0, 0.25).unwrap();
        assert_relative_eq!(n.net, 90.0);
        assert_relative_eq!(n.sigma, (100.0_f64 + 0.0625 * 40.0).sqrt());
    }

    #[test]
    fn significance_of_low_rate_series() {
        let n = NetCounts { net: 41.0, sigma: 14.0 };
        assert_relative_eq!(n.significance().unwrap(), 41.0 / 14.0, epsilon = 1e-12);
        assert!((n.significance().unwrap() - 2.93).abs() < 0.01);
    }

    #[test]
    fn aggregation_is_associative() {
        let runs: Vec<RunRecord> = (0..35)
            .map(|i| RunRecord {
                duration_s: 1800.0,
                raw: 50.0 + i as f64,
                background: 30.0 + (i % 7) as f64,
            })
            .collect();
        let whole = aggregate_runs(&runs).unwrap();
        let left = aggregate_runs(&runs[..12]).unwrap();
        let right = aggregate_runs(&runs[12..]).unwrap();
        assert_eq!(whole.n_runs, left.n_runs + right.n_runs);
        assert_eq!(whole.raw, left.raw + right.raw);
        assert_eq!(whole.background, left.background + right.background);
        assert_eq!(whole.total_duration_s, left.total_duration_s + right.total_duration_s);
    }

    #[test]
    fn power_correction_scales_counts() {
        let r = RunRecord { duration_s: 3600.0, raw: 200.0, background: 100.0 };
        let c = power_correct(r, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(c.raw, 400.0);
        assert_relative_eq!(c.background, 200.0);
        let q = power_correct(r, 0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(q.raw, 800.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(subtract_background(-1.0, 0.0, 1.0).is_err());
        assert!(subtract_background(1.0, 1.0, 0.0).is_err());
        assert!(aggregate_runs(&[]).is_err());
        let r = RunRecord { duration_s: 1.0, raw: 1.0, background: 0.0 };
        assert!(power_correct(r, 0.0, 1.0, 1.0).is_err());
        let zero_sigma = NetCounts { net: 1.0, sigma: 0.0 };
        assert!(zero_sigma.significance().is_err());
    }
}
