//! Report rows and their JSON/CSV encodings.
//!
//! Every table is written by serde and read back by the functions here, so the
//! files are self-consistent. Floats use the shortest representation that
//! round-trips; missing statistics are `null` in JSON and empty in CSV.

use std::io::Read;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::event_study::{DdEstimate, Panel};
use crate::msgarch::{GjrFit, MsGarchParams, StartSummary};
use crate::spectral::{AmplitudeSpectrum, Band, BandReport, FREQUENCIES};
use crate::vol::{Estimator, PeriodVolSummary};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Shape(String),
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, TableError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| TableError::Io(e.into_error()))
}

pub fn from_csv<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>, TableError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(TableError::from)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, TableError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T, TableError> {
    Ok(serde_json::from_reader(input)?)
}

/// Daily volatility table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DailyVolRow {
    pub date: NaiveDate,
    pub sigma: f64,
    #[serde(rename = "sigmaGK")]
    pub sigma_gk: f64,
    pub clamped: bool,
    #[serde(rename = "clampedGK")]
    pub clamped_gk: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EstimatorName {
    Realized,
    GarmanKlass,
}

impl From<Estimator> for EstimatorName {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Realized => EstimatorName::Realized,
            Estimator::GarmanKlass => EstimatorName::GarmanKlass,
        }
    }
}

/// One (estimator, period) cell of the period-average volatility table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VolSummaryRow {
    pub estimator: EstimatorName,
    pub period: String,
    pub mean: f64,
    pub std_error: Option<f64>,
    pub n: usize,
    pub diff_from_baseline: f64,
    pub diff_t_stat: Option<f64>,
}

impl VolSummaryRow {
    pub fn new(estimator: Estimator, s: &PeriodVolSummary) -> Self {
        Self {
            estimator: estimator.into(),
            period: s.label.clone(),
            mean: s.mean,
            std_error: s.std_error,
            n: s.n,
            diff_from_baseline: s.diff_from_baseline,
            diff_t_stat: s.diff_t_stat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VolSummaryTable {
    pub dataset: String,
    pub baseline: String,
    /// Differences are `period mean − baseline mean`.
    pub difference: String,
    pub rows: Vec<VolSummaryRow>,
}

/// Difference-in-differences estimates for one event period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DdRow {
    pub period: String,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub se_alpha: f64,
    pub se_beta1: f64,
    pub se_beta2: f64,
    pub se_beta3: f64,
    pub t_alpha: Option<f64>,
    pub t_beta1: Option<f64>,
    pub t_beta2: Option<f64>,
    pub t_beta3: Option<f64>,
    pub n_obs: usize,
    pub residual_variance: f64,
    /// Days dropped because σ was not positive.
    pub excluded_days: usize,
}

impl DdRow {
    pub fn new(period: &str, est: &DdEstimate, panel: &Panel) -> Self {
        Self {
            period: period.to_string(),
            alpha: est.alpha,
            beta1: est.beta1,
            beta2: est.beta2,
            beta3: est.beta3,
            se_alpha: est.std_errors[0],
            se_beta1: est.std_errors[1],
            se_beta2: est.std_errors[2],
            se_beta3: est.std_errors[3],
            t_alpha: est.t_stats[0],
            t_beta1: est.t_stats[1],
            t_beta2: est.t_stats[2],
            t_beta3: est.t_stats[3],
            n_obs: est.n_obs,
            residual_variance: est.residual_variance,
            excluded_days: panel.excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DdTable {
    pub treatment: String,
    pub control: String,
    pub baseline: String,
    pub dependent: String,
    pub rows: Vec<DdRow>,
}

/// Band statistics of one period's change ratios against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BandRow {
    pub period: String,
    pub band: Band,
    pub first_frequency: usize,
    pub last_frequency: usize,
    pub mean_change: f64,
    pub t_stat: f64,
    pub n: usize,
}

impl BandRow {
    pub fn new(period: &str, r: &BandReport) -> Self {
        let (lo, hi) = r.band.frequencies();
        Self {
            period: period.to_string(),
            band: r.band,
            first_frequency: lo,
            last_frequency: hi,
            mean_change: r.mean_change,
            t_stat: r.t_stat,
            n: r.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BandTable {
    pub dataset: String,
    pub baseline: String,
    pub rows: Vec<BandRow>,
}

/// Plot data: period RMS amplitude and its ratio to the baseline, per frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeRatioRow {
    pub period: String,
    pub frequency: usize,
    pub rms_amplitude: f64,
    pub ratio: f64,
}

/// Plot data: daily close and close-to-close log return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DailyPriceRow {
    pub date: NaiveDate,
    pub close: f64,
    pub log_return: f64,
    pub missing_minutes: usize,
}

/// Plot data: smoothed regime probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegimeProbRow {
    pub date: NaiveDate,
    /// Model input: daily log return × 100.
    pub scaled_return: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub filtered_p_low: f64,
    pub filtered_p_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MsGarchReport {
    pub dataset: String,
    /// How the model input was built from the day grids.
    pub preprocessing: String,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub observations: usize,
    /// Regime 1 (`regimes[0]`) has the lower unconditional variance.
    pub params: MsGarchParams,
    pub unconditional_variances: [f64; 2],
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
    pub initial_variance: f64,
    pub single_regime: GjrFit,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExcludedDayRow {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeriodCount {
    pub period: String,
    pub days: usize,
}

/// What ingestion kept and dropped for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestReport {
    pub dataset: String,
    pub bars: usize,
    pub days: usize,
    pub excluded: Vec<ExcludedDayRow>,
    pub period_counts: Vec<PeriodCount>,
    /// Days outside every period.
    pub dropped_days: usize,
    pub notices: Vec<String>,
}

/// Per-day amplitude spectra, one CSV row per day with columns `date,c1..c720`.
pub fn spectra_to_csv(spectra: &[AmplitudeSpectrum]) -> Result<Vec<u8>, TableError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend((1..=FREQUENCIES).map(|f| format!("c{f}")));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(FREQUENCIES + 1);
    for s in spectra {
        record.clear();
        record.push(s.date.to_string());
        // `Display` for f64 prints the shortest string that parses back exactly.
        record.extend(s.amplitudes.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.into_inner().map_err(|e| TableError::Io(e.into_error()))
}

pub fn spectra_from_csv<R: Read>(input: R) -> Result<Vec<AmplitudeSpectrum>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.len() != FREQUENCIES + 1 {
        return Err(TableError::Shape(format!("expected {} columns", FREQUENCIES + 1)));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let date = rec[0]
            .parse()
            .map_err(|e| TableError::Shape(format!("bad date `{}`: {e}", &rec[0])))?;
        let amplitudes = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| TableError::Shape(format!("bad amplitude `{v}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(AmplitudeSpectrum { date, amplitudes });
    }
    Ok(out)
}
