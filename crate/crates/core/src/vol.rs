//! Daily volatility estimators and period summaries.
//!
//! `realized_vol` is the first-order autocovariance corrected realized volatility
//! over the 1440 one-minute returns of a day; `garman_klass_vol` sums the
//! per-minute Garman-Klass range terms. Both clamp a negative radicand to zero
//! and flag the day.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{DayGrid, Dated, MinuteBar};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum VolError {
    #[error("invalid bar at minute {minute}: {message}")]
    InvalidBar { minute: usize, message: String },
    #[error("empty {0} series")]
    Empty(&'static str),
}

/// Radicand and its square root (or zero, flagged, when the radicand is negative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedRoot {
    pub radicand: f64,
    pub value: f64,
    pub clamped: bool,
}

impl ClampedRoot {
    fn of(radicand: f64) -> Self {
        if radicand >= 0.0 {
            Self {
                radicand,
                value: radicand.sqrt(),
                clamped: false,
            }
        } else {
            Self {
                radicand,
                value: 0.0,
                clamped: true,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyVol {
    pub date: NaiveDate,
    pub sigma: f64,
    #[serde(rename = "sigmaGK")]
    pub sigma_gk: f64,
    /// The realized-volatility radicand was negative; `sigma` is 0.
    pub clamped: bool,
    /// The Garman-Klass radicand was negative; `sigma_gk` is 0.
    #[serde(rename = "clampedGK", default)]
    pub clamped_gk: bool,
}

impl Dated for DailyVol {
    fn date(&self) -> NaiveDate {
        self.date
    }
}

/// Bias-corrected realized volatility of a return vector:
/// `sqrt(Σ r_k² + 2·n/(n−1)·Σ r_k r_{k+1})`.
pub fn realized_vol_of(returns: &[f64]) -> ClampedRoot {
    let n = returns.len();
    if n < 2 {
        return ClampedRoot::of(returns.iter().map(|r| r * r).sum());
    }
    let sum_sq: f64 = returns.iter().map(|r| r * r).sum();
    let cross: f64 = returns.windows(2).map(|w| w[0] * w[1]).sum();
    let scale = n as f64 / (n - 1) as f64;
    ClampedRoot::of(sum_sq + 2.0 * scale * cross)
}

pub fn realized_vol(day: &DayGrid) -> ClampedRoot {
    realized_vol_of(&day.returns)
}

/// Garman-Klass range term of a single bar.
pub fn garman_klass_term(bar: &MinuteBar) -> f64 {
    let hl = (bar.high / bar.low).ln();
    let co = (bar.close / bar.open).ln();
    0.5 * hl * hl - (2.0 * std::f64::consts::LN_2 - 1.0) * co * co
}

pub fn garman_klass_of(bars: &[MinuteBar]) -> Result<ClampedRoot, VolError> {
    let mut sum = 0.0;
    for (minute, bar) in bars.iter().enumerate() {
        bar.validate()
            .map_err(|message| VolError::InvalidBar { minute, message })?;
        sum += garman_klass_term(bar);
    }
    Ok(ClampedRoot::of(sum))
}

pub fn garman_klass_vol(day: &DayGrid) -> Result<ClampedRoot, VolError> {
    garman_klass_of(&day.bars)
}

pub fn daily_vol(day: &DayGrid) -> Result<DailyVol, VolError> {
    let rv = realized_vol(day);
    let gk = garman_klass_vol(day)?;
    Ok(DailyVol {
        date: day.date,
        sigma: rv.value,
        sigma_gk: gk.value,
        clamped: rv.clamped,
        clamped_gk: gk.clamped,
    })
}

/// Which daily estimator a summary is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "rv")]
    Realized,
    #[serde(rename = "gk")]
    GarmanKlass,
}

impl Estimator {
    pub fn pick(self, v: &DailyVol) -> f64 {
        match self {
            Estimator::Realized => v.sigma,
            Estimator::GarmanKlass => v.sigma_gk,
        }
    }
}

/// One period column of the volatility table. Differences are `mean − baseline mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeriodVolSummary {
    pub label: String,
    pub mean: f64,
    /// `None` when the period has a single day.
    pub std_error: Option<f64>,
    pub n: usize,
    pub diff_from_baseline: f64,
    /// `None` when either series has fewer than two days.
    pub diff_t_stat: Option<f64>,
}

/// Mean, standard error and Welch t-statistic against the baseline for one period.
pub fn summarize_values(label: &str, values: &[f64], baseline: &[f64]) -> Result<PeriodVolSummary, VolError> {
    if values.is_empty() {
        return Err(VolError::Empty("period"));
    }
    if baseline.is_empty() {
        return Err(VolError::Empty("baseline"));
    }
    let mean = stats::mean(values);
    let std_error = stats::standard_error(values);
    let diff = mean - stats::mean(baseline);
    Ok(PeriodVolSummary {
        label: label.to_string(),
        mean,
        std_error,
        n: values.len(),
        diff_from_baseline: diff,
        diff_t_stat: stats::welch_t(values, baseline),
    })
}

pub fn summarize_period(
    label: &str,
    vols: &[&DailyVol],
    baseline: &[&DailyVol],
    estimator: Estimator,
) -> Result<PeriodVolSummary, VolError> {
    let v: Vec<f64> = vols.iter().map(|d| estimator.pick(d)).collect();
    let b: Vec<f64> = baseline.iter().map(|d| estimator.pick(d)).collect();
    summarize_values(label, &v, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn padded(head: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; 1440];
        r[..head.len()].copy_from_slice(head);
        r
    }

    #[test]
    fn zero_returns() {
        let rv = realized_vol_of(&vec![0.0; 1440]);
        assert_eq!(rv.value, 0.0);
        assert!(!rv.clamped);
    }

    #[test]
    fn three_nonzero_returns() {
        // Σr² = 6e-4, adjacent products 2e-4 − 2e-4 = 0.
        let rv = realized_vol_of(&padded(&[0.01, 0.02, -0.01]));
        assert!((rv.value - 6e-4f64.sqrt()).abs() < 1e-15);
        assert!((rv.value - 0.024_494_897_427_831_78).abs() < 1e-15);
        assert!(!rv.clamped);
    }

    #[test]
    fn negative_radicand_clamps() {
        let rv = realized_vol_of(&padded(&[0.01, -0.01]));
        assert!(rv.clamped);
        assert_eq!(rv.value, 0.0);
        // 2e-4 − 2·(1440/1439)·1e-4 = −2e-4/1439
        assert!((rv.radicand - (-2e-4 / 1439.0)).abs() < 1e-20);
        assert!((rv.radicand + 1.389854e-7).abs() < 1e-12);
    }

    #[test]
    fn gk_flat_and_single_bar() {
        let flat = vec![MinuteBar::flat(0, 100.0); 1440];
        assert_eq!(garman_klass_of(&flat).unwrap().value, 0.0);

        let mut bars = flat.clone();
        bars[0] = MinuteBar::new(0, 100.0, 110.0, 100.0, 105.0).unwrap();
        let term = garman_klass_term(&bars[0]);
        assert!((term - 0.003_622_449).abs() < 5e-9, "{term}");
        let gk = garman_klass_of(&bars).unwrap();
        assert!((gk.value - 0.060_187).abs() < 5e-7, "{}", gk.value);

        let same = vec![bars[0]; 1440];
        let gk = garman_klass_of(&same).unwrap();
        assert!((gk.value - (1440.0 * term).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gk_rejects_bad_bar() {
        let bars = vec![MinuteBar {
            timestamp: 0,
            open: 1.0,
            high: 0.5,
            low: 1.0,
            close: 1.0,
        }];
        assert!(matches!(
            garman_klass_of(&bars),
            Err(VolError::InvalidBar { minute: 0, .. })
        ));
    }

    #[test]
    fn gk_term_nonnegative_on_valid_bars() {
        // |ln(C/O)| <= ln(H/L) bounds each term below by (1/2 - (2 ln 2 - 1))·ln(H/L)^2.
        let up = MinuteBar::new(0, 100.0, 103.0, 100.0, 103.0).unwrap();
        assert!(garman_klass_term(&up) > 0.0);
        let c = ClampedRoot::of(-1e-9);
        assert!(c.clamped && c.value == 0.0);
    }

    #[test]
    fn welch_example() {
        let s = summarize_values("P1", &[0.02, 0.04], &[0.01, 0.03]).unwrap();
        assert!((s.mean - 0.03).abs() < 1e-15);
        assert!((s.diff_from_baseline - 0.01).abs() < 1e-15);
        let t = s.diff_t_stat.unwrap();
        assert!((t - 0.01 / (0.0002f64 / 2.0 + 0.0002 / 2.0).sqrt()).abs() < 1e-12);
        assert!((t - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn self_comparison_is_zero() {
        let v = [0.05, 0.04, 0.07, 0.03];
        let s = summarize_values("P0", &v, &v).unwrap();
        assert_eq!(s.diff_from_baseline, 0.0);
        assert_eq!(s.diff_t_stat, Some(0.0));
    }

    #[test]
    fn single_day_has_no_std_error() {
        let s = summarize_values("P1", &[0.05], &[0.04, 0.06]).unwrap();
        assert_eq!(s.std_error, None);
        assert_eq!(s.diff_t_stat, None);
        assert!(summarize_values("P1", &[], &[0.04]).is_err());
    }
}
