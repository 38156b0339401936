//! The virtual counting experiment: calibrated coincidence rates, Poisson
//! count generation over coincidence and delayed background windows, and
//! run-series simulation for both theoretical predictions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::stats::{aggregate_runs, NetCounts, RunRecord, RunSeries};
use crate::{Error, Result};

/// Timing plan of an acquisition: window widths and per-run duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionPlan {
    /// Coincidence window in seconds.
    pub coincidence_window_s: f64,
    /// Delayed window used for the accidental-background estimate.
    pub background_window_s: f64,
    pub run_duration_s: f64,
    pub n_runs: usize,
}

impl AcquisitionPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coincidence_window_s", self.coincidence_window_s),
            ("background_window_s", self.background_window_s),
            ("run_duration_s", self.run_duration_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be >= 1".into()));
        }
        Ok(())
    }

    /// Ratio rescaling delayed-window counts to the coincidence window.
    pub fn window_ratio(&self) -> f64 {
        self.coincidence_window_s / self.background_window_s
    }
}

impl Default for AcquisitionPlan {
    fn default() -> Self {
        Self {
            coincidence_window_s: 2.6e-9,
            background_window_s: 16e-9,
            run_duration_s: 1800.0,
            n_runs: 35,
        }
    }
}

/// Detector singles rates feeding the accidental-coincidence estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglesRates {
    pub detector_1_hz: f64,
    pub detector_2_hz: f64,
}

/// Accidental coincidence rate `S1 * S2 * tau` for uncorrelated singles in
/// a window of width `tau`.
pub fn accidental_rate(singles: SinglesRates, window_s: f64) -> Result<f64> {
    if !(singles.detector_1_hz >= 0.0 && singles.detector_2_hz >= 0.0) {
        return Err(Error::Config("singles rates must be nonnegative".into()));
    }
    if !(window_s > 0.0) {
        return Err(Error::Config(format!(
            "window must be positive, got {window_s}"
        )));
    }
    Ok(singles.detector_1_hz * singles.detector_2_hz * window_s)
}

/// Maps a dimensionless model prediction (normalized coincidence rate or
/// ensemble fraction) to true coincidences per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScale {
    pub coincidences_per_second_per_unit: f64,
}

impl CalibrationScale {
    /// Chooses the scale so that `reference_prediction` yields
    /// `reference_rate_hz` true coincidences per second. Both theories are
    /// calibrated at the same reference setting so their predictions stay
    /// comparable.
    pub fn from_reference(reference_prediction: f64, reference_rate_hz: f64) -> Result<Self> {
        if !(reference_prediction > 0.0 && reference_prediction.is_finite()) {
            return Err(Error::Calibration(format!(
                "reference prediction must be positive, got {reference_prediction}"
            )));
        }
        if !(reference_rate_hz > 0.0 && reference_rate_hz.is_finite()) {
            return Err(Error::Calibration(format!(
                "reference rate must be positive, got {reference_rate_hz}"
            )));
        }
        Ok(Self {
            coincidences_per_second_per_unit: reference_rate_hz / reference_prediction,
        })
    }

    pub fn rate_hz(&self, prediction: f64) -> f64 {
        self.coincidences_per_second_per_unit * prediction
    }
}

/// One simulated acquisition run: Poisson counts in both windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub run_index: usize,
    pub duration_s: f64,
    /// Counts in the coincidence window (true + accidental).
    pub raw: f64,
    /// Counts in the delayed background window (accidental only).
    pub background: f64,
}

impl From<CountRecord> for RunRecord {
    fn from(c: CountRecord) -> Self {
        RunRecord {
            duration_s: c.duration_s,
            raw: c.raw,
            background: c.background,
        }
    }
}

fn draw_poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<f64> {
    if mean == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::Config(format!("invalid Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Simulates the counts of one run. Raw-window counts are Poisson with mean
/// `(true_rate + accidental) * T`; the delayed window sees accidentals only,
/// scaled by its width. Deterministic given (seed, run_index).
pub fn simulate_counts(
    true_rate_hz: f64,
    singles: SinglesRates,
    plan: &AcquisitionPlan,
    run_index: usize,
    seed: u64,
) -> Result<CountRecord> {
    plan.validate()?;
    if !(true_rate_hz >= 0.0 && true_rate_hz.is_finite()) {
        return Err(Error::Config(format!(
            "true coincidence rate must be nonnegative, got {true_rate_hz}"
        )));
    }
    let accidental_cw = accidental_rate(singles, plan.coincidence_window_s)?;
    let accidental_bw = accidental_rate(singles, plan.background_window_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((run_index as u64).wrapping_add(1));
    let raw = draw_poisson(&mut rng, (true_rate_hz + accidental_cw) * plan.run_duration_s)?;
    let background = draw_poisson(&mut rng, accidental_bw * plan.run_duration_s)?;
    Ok(CountRecord {
        run_index,
        duration_s: plan.run_duration_s,
        raw,
        background,
    })
}

/// Outcome of a simulated series: the per-run records, their totals, and
/// the background-subtracted result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesOutcome {
    pub records: Vec<CountRecord>,
    pub series: RunSeries,
    pub net: NetCounts,
    pub significance: f64,
}

/// Simulates a full series of runs at one detector setting and reduces it
/// with the same subtraction used on the real counts.
pub fn simulate_run_series(
    true_rate_hz: f64,
    singles: SinglesRates,
    plan: &AcquisitionPlan,
    seed: u64,
) -> Result<SeriesOutcome> {
    plan.validate()?;
    let records: Vec<CountRecord> = (0..plan.n_runs)
        .map(|i| simulate_counts(true_rate_hz, singles, plan, i, seed))
        .collect::<Result<_>>()?;
    let runs: Vec<RunRecord> = records.iter().map(|&c| c.into()).collect();
    let series = aggregate_runs(&runs)?;
    let net = series.net_counts(plan.window_ratio())?;
    let significance = net.significance()?;
    Ok(SeriesOutcome {
        records,
        series,
        net,
        significance,
    })
}
