//! Intraday amplitude spectra of the log-price grid.
//!
//! For a day with grid `P(1..=N)`, `N = 1441`, the coefficients at frequency `w`
//! (cycles per day) are
//!
//! ```text
//! a(w) = 2/N · Σ_k P(k) cos(2πwk/N)
//! b(w) = 2/N · Σ_k P(k) sin(2πwk/N)
//! C(w) = sqrt(a² + b²),   w = 1..=720
//! ```
//!
//! Because `N` is odd, `½ Σ_w C(w)²` equals the population variance of the grid.

use std::sync::Arc;

use chrono::NaiveDate;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{DayGrid, Dated, GRID_POINTS};
use crate::stats;

/// Number of positive frequencies on a 1441-point grid.
pub const FREQUENCIES: usize = (GRID_POINTS - 1) / 2;
/// Frequencies per band (low, medium, high).
pub const BAND_WIDTH: usize = 240;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },
    #[error("no spectra to average")]
    Empty,
    #[error("baseline amplitude at frequency {0} is not positive")]
    ZeroBaseline(usize),
    #[error("zero variance of change ratios in the {0} band")]
    DegenerateVariance(Band),
}

/// Direct-summation DFT of a real series on an odd-length grid.
///
/// Holds the `cos/sin(2πj/N)` table so that every term is an exact table lookup.
#[derive(Debug, Clone)]
pub struct DirectDft {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierCoefficients {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.cos
            .iter()
            .zip(&self.sin)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }
}

impl DirectDft {
    pub fn new(n: usize) -> Self {
        let step = 2.0 * std::f64::consts::PI / n as f64;
        Self {
            cos: (0..n).map(|j| (step * j as f64).cos()).collect(),
            sin: (0..n).map(|j| (step * j as f64).sin()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    /// Coefficients for `w = 1..=(N−1)/2`; `series[k−1]` is `P(k)`.
    pub fn coefficients(&self, series: &[f64]) -> Result<FourierCoefficients, SpectralError> {
        let n = self.len();
        if series.len() != n {
            return Err(SpectralError::Length {
                expected: n,
                found: series.len(),
            });
        }
        let half = (n - 1) / 2;
        let scale = 2.0 / n as f64;
        let mut cos = Vec::with_capacity(half);
        let mut sin = Vec::with_capacity(half);
        for w in 1..=half {
            let (mut a, mut b) = (0.0, 0.0);
            let mut idx = w % n; // (w·k) mod n for k = 1
            for &p in series {
                a += p * self.cos[idx];
                b += p * self.sin[idx];
                idx += w;
                if idx >= n {
                    idx -= n;
                }
            }
            cos.push(scale * a);
            sin.push(scale * b);
        }
        Ok(FourierCoefficients { cos, sin })
    }
}

/// FFT evaluation of the same coefficients.
pub struct FastDft {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl FastDft {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        Self { n, fft }
    }

    pub fn coefficients(&self, series: &[f64]) -> Result<FourierCoefficients, SpectralError> {
        let n = self.n;
        if series.len() != n {
            return Err(SpectralError::Length {
                expected: n,
                found: series.len(),
            });
        }
        let mut buf: Vec<Complex<f64>> = series.iter().map(|&p| Complex::new(p, 0.0)).collect();
        self.fft.process(&mut buf);
        let half = (n - 1) / 2;
        let scale = 2.0 / n as f64;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut cos = Vec::with_capacity(half);
        let mut sin = Vec::with_capacity(half);
        for (w, x) in buf.iter().enumerate().take(half + 1).skip(1) {
            // The grid is indexed from k = 1, so shift the FFT's k = 0 phase by one step.
            let shifted = x * Complex::from_polar(1.0, -step * w as f64);
            cos.push(scale * shifted.re);
            sin.push(-scale * shifted.im);
        }
        Ok(FourierCoefficients { cos, sin })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSpectrum {
    pub date: NaiveDate,
    /// `amplitudes[w − 1]` is `C(w)`.
    pub amplitudes: Vec<f64>,
}

impl Dated for AmplitudeSpectrum {
    fn date(&self) -> NaiveDate {
        self.date
    }
}

pub fn amplitude_spectrum(dft: &DirectDft, day: &DayGrid) -> Result<AmplitudeSpectrum, SpectralError> {
    Ok(AmplitudeSpectrum {
        date: day.date,
        amplitudes: dft.coefficients(&day.log_prices)?.amplitudes(),
    })
}

/// Root-mean-square amplitude per frequency over a set of days.
pub fn period_rms_amplitude(spectra: &[&AmplitudeSpectrum]) -> Result<Vec<f64>, SpectralError> {
    let first = spectra.first().ok_or(SpectralError::Empty)?;
    let width = first.amplitudes.len();
    let mut acc = vec![0.0; width];
    for s in spectra {
        if s.amplitudes.len() != width {
            return Err(SpectralError::Length {
                expected: width,
                found: s.amplitudes.len(),
            });
        }
        for (a, c) in acc.iter_mut().zip(&s.amplitudes) {
            *a += c * c;
        }
    }
    let n = spectra.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n).sqrt()).collect())
}

/// Element-wise `current / baseline`.
pub fn change_ratios(current: &[f64], baseline: &[f64]) -> Result<Vec<f64>, SpectralError> {
    if current.len() != baseline.len() {
        return Err(SpectralError::Length {
            expected: baseline.len(),
            found: current.len(),
        });
    }
    current
        .iter()
        .zip(baseline)
        .enumerate()
        .map(|(i, (c, b))| {
            if *b > 0.0 {
                Ok(c / b)
            } else {
                Err(SpectralError::ZeroBaseline(i + 1))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Medium,
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Medium, Band::High];

    /// Inclusive frequency range of the band.
    pub fn frequencies(self) -> (usize, usize) {
        let i = self as usize;
        (i * BAND_WIDTH + 1, (i + 1) * BAND_WIDTH)
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BandReport {
    pub band: Band,
    pub mean_change: f64,
    pub t_stat: f64,
    pub n: usize,
}

/// Band mean of a slice of change ratios and its one-sample t-statistic against 1.
pub fn band_stat(band: Band, values: &[f64]) -> Result<BandReport, SpectralError> {
    let t_stat = stats::one_sample_t(values, 1.0).ok_or(SpectralError::DegenerateVariance(band))?;
    Ok(BandReport {
        band,
        mean_change: stats::mean(values),
        t_stat,
        n: values.len(),
    })
}

/// One-sample t-tests of the mean change ratio against 1 in each 240-frequency band.
pub fn band_tests(changes: &[f64]) -> Result<[BandReport; 3], SpectralError> {
    if changes.len() != FREQUENCIES {
        return Err(SpectralError::Length {
            expected: FREQUENCIES,
            found: changes.len(),
        });
    }
    let report = |band: Band| {
        let (lo, hi) = band.frequencies();
        band_stat(band, &changes[lo - 1..hi])
    };
    Ok([report(Band::Low)?, report(Band::Medium)?, report(Band::High)?])
}

/// Variance floor below which the Parseval gap is reported in absolute terms.
pub const PARSEVAL_FLOOR: f64 = 1e-12;

/// Relative gap between the grid's population variance and `½ Σ C(w)²`.
pub fn parseval_check(log_prices: &[f64], spectrum: &AmplitudeSpectrum) -> f64 {
    let n = log_prices.len() as f64;
    let mean = log_prices.iter().sum::<f64>() / n;
    let pop_var = log_prices.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    let half_power = 0.5 * spectrum.amplitudes.iter().map(|c| c * c).sum::<f64>();
    (pop_var - half_power).abs() / pop_var.max(PARSEVAL_FLOOR)
}
