//! End-to-end runs: minute bars in, report tables and plot data out.
//!
//! Each dataset goes through ingestion, then independently through the
//! volatility, spectral and regime stages. The difference-in-differences stage
//! joins the treatment and control volatility series. A failing stage is
//! recorded and only its dependents are skipped. Every file is hashed and the
//! manifest is written last; it holds no timestamps or absolute paths, so
//! identical inputs give an identical manifest.

pub mod config;
pub mod tables;

pub use config::{ConfigFile, PeriodSpec, RunConfig, SchemeSpec};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::event_study::{build_panel, estimate_dd, DdError};
use crate::market_data::{
    assign_periods, build_day_grids, parse_bars, write_grid_records, DayGrid, GridBuild, MarketDataError,
    PeriodScheme,
};
use crate::msgarch::{fit_msgarch, FitConfig, MsGarchError};
use crate::spectral::{amplitude_spectrum, band_tests, change_ratios, period_rms_amplitude, DirectDft, SpectralError};
use crate::vol::{daily_vol, summarize_period, DailyVol, Estimator, VolError};

use tables::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    fn new(stage: &str, kind: ErrorKind, message: impl fmt::Display) -> Self {
        Self {
            stage: stage.to_string(),
            kind,
            message: message.to_string(),
        }
    }
}

trait Classify: fmt::Display {
    fn kind(&self) -> ErrorKind;

    fn at(&self, stage: &str) -> PipelineError {
        PipelineError::new(stage, self.kind(), self)
    }
}

impl Classify for MarketDataError {
    fn kind(&self) -> ErrorKind {
        match self {
            MarketDataError::Scheme(_) | MarketDataError::Timezone(_) | MarketDataError::MissingFraction(_) => {
                ErrorKind::Config
            }
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for VolError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for SpectralError {
    fn kind(&self) -> ErrorKind {
        match self {
            SpectralError::ZeroBaseline(_) | SpectralError::DegenerateVariance(_) => ErrorKind::Numerical,
            SpectralError::Length { .. } | SpectralError::Empty => ErrorKind::Data,
        }
    }
}

impl Classify for DdError {
    fn kind(&self) -> ErrorKind {
        match self {
            DdError::UnknownPeriod(_) => ErrorKind::Config,
            DdError::Singular => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for MsGarchError {
    fn kind(&self) -> ErrorKind {
        match self {
            MsGarchError::Domain(_) | MsGarchError::Probabilities(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for TableError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

/// Which analyses to run. Ingestion always runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Plan {
    pub rv: bool,
    pub spectrum: bool,
    pub bands: bool,
    pub did: bool,
    pub msgarch: bool,
}

impl Plan {
    pub fn ingest() -> Self {
        Self::default()
    }

    /// Every stage; difference-in-differences only if a treatment or control
    /// label is configured.
    pub fn report(config: &RunConfig) -> Self {
        Self {
            rv: true,
            spectrum: true,
            bands: true,
            did: config.treatment_label.is_some() || config.control_label.is_some(),
            msgarch: true,
        }
    }

    fn name(&self) -> String {
        let mut parts = vec!["ingest"];
        for (on, name) in [
            (self.rv, "rv"),
            (self.spectrum || self.bands, "spectrum"),
            (self.bands, "bands"),
            (self.did, "did"),
            (self.msgarch, "msgarch"),
        ] {
            if on {
                parts.push(name);
            }
        }
        parts.join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputEntry {
    pub label: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageEntry {
    pub stage: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stages_requested: String,
    pub config: ConfigFile,
    pub inputs: Vec<InputEntry>,
    pub outputs: Vec<OutputEntry>,
    pub stages: Vec<StageEntry>,
    /// Results that were produced but need attention, such as a fit that did not converge.
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
    pub errors: Vec<PipelineError>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

impl RunSummary {
    /// 0 on success, otherwise the code of the first recorded error.
    pub fn exit_code(&self) -> i32 {
        self.manifest.errors.first().map_or(0, |e| e.kind.exit_code())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Run<'a> {
    config: &'a RunConfig,
    root: PathBuf,
    outputs: Vec<OutputEntry>,
    stages: Vec<StageEntry>,
    flags: Vec<String>,
    warnings: Vec<String>,
    errors: Vec<PipelineError>,
}

impl Run<'_> {
    fn write(&mut self, stage: &str, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = rel.split('/').fold(self.root.clone(), |p, part| p.join(part));
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::new(stage, ErrorKind::Data, e))?;
        }
        fs::write(&path, bytes)
            .map_err(|e| PipelineError::new(stage, ErrorKind::Data, format!("writing {rel}: {e}")))?;
        self.outputs.push(OutputEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn record<T>(&mut self, stage: &str, result: Result<T, PipelineError>) -> Option<T> {
        match result {
            Ok(v) => {
                self.stages.push(StageEntry {
                    stage: stage.to_string(),
                    status: StageStatus::Ok,
                    message: None,
                });
                Some(v)
            }
            Err(e) => {
                self.stages.push(StageEntry {
                    stage: stage.to_string(),
                    status: StageStatus::Failed,
                    message: Some(e.message.clone()),
                });
                self.errors.push(e);
                None
            }
        }
    }

    fn skip(&mut self, stage: &str, because: &str) {
        self.stages.push(StageEntry {
            stage: stage.to_string(),
            status: StageStatus::Skipped,
            message: Some(format!("{because} failed")),
        });
    }
}

fn stage_name(stage: &str, label: &str) -> String {
    format!("{stage}[{label}]")
}

/// Runs the planned stages and writes all outputs plus the manifest.
///
/// Configuration problems are returned as `Err` before anything is computed.
/// Stage failures are recorded in the manifest and reflected in
/// [`RunSummary::exit_code`].
pub fn run_pipeline(config: &RunConfig, plan: Plan) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    if config.input_paths.is_empty() {
        return Err(PipelineError::config("no input files configured"));
    }
    if plan.did {
        config.dd_labels()?;
    }
    fs::create_dir_all(&config.output_dir).map_err(|e| {
        PipelineError::config(format!("cannot create output directory {}: {e}", config.output_dir.display()))
    })?;

    let mut run = Run {
        config,
        root: config.output_dir.clone(),
        outputs: Vec::new(),
        stages: Vec::new(),
        flags: Vec::new(),
        warnings: Vec::new(),
        errors: Vec::new(),
    };
    let dft = DirectDft::new(crate::market_data::GRID_POINTS);
    let mut inputs = Vec::new();
    let mut vols: Vec<(String, Vec<DailyVol>)> = Vec::new();

    for (label, path) in &config.input_paths {
        let stage = stage_name("ingest", label);
        let ingested = ingest(&mut run, &stage, label, path);
        let Some((input, grids)) = run.record(&stage, ingested) else {
            for s in ["rv", "spectrum", "bands", "msgarch"] {
                run.skip(&stage_name(s, label), &stage);
            }
            continue;
        };
        inputs.push(input);

        let dd_needs = plan.did
            && [&config.treatment_label, &config.control_label]
                .iter()
                .any(|l| l.as_deref() == Some(label.as_str()));
        if plan.rv || dd_needs {
            let stage = stage_name("rv", label);
            let out = volatility(&mut run, &stage, label, &grids, plan.rv);
            if let Some(v) = run.record(&stage, out) {
                vols.push((label.clone(), v));
            }
        }
        if plan.spectrum || plan.bands {
            let stage = stage_name("spectrum", label);
            let out = spectrum(&mut run, &stage, label, &grids, &dft);
            match run.record(&stage, out) {
                Some(rms) if plan.bands => {
                    let stage = stage_name("bands", label);
                    let out = bands(&mut run, &stage, label, &rms);
                    run.record(&stage, out);
                }
                None if plan.bands => run.skip(&stage_name("bands", label), &stage),
                _ => {}
            }
        }
        if plan.msgarch {
            let stage = stage_name("msgarch", label);
            let out = msgarch(&mut run, &stage, label, &grids);
            run.record(&stage, out);
        }
    }

    if plan.did {
        let (t, c) = config.dd_labels()?;
        let find = |l: &str| vols.iter().find(|(label, _)| label == l).map(|(_, v)| v.as_slice());
        match (find(t), find(c)) {
            (Some(tv), Some(cv)) => {
                let out = did(&mut run, t, c, tv, cv);
                run.record("did", out);
            }
            _ => run.skip("did", "volatility for the treatment or control dataset"),
        }
    }

    run.outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: "volstudy".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stages_requested: plan.name(),
        config: manifest_config(config),
        inputs,
        outputs: run.outputs,
        stages: run.stages,
        flags: run.flags,
        warnings: run.warnings,
        errors: run.errors,
    };
    let bytes = to_json(&manifest).map_err(|e| e.at("manifest"))?;
    let manifest_path = config.output_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, bytes).map_err(|e| PipelineError::new("manifest", ErrorKind::Data, e))?;
    Ok(RunSummary {
        manifest,
        manifest_path,
    })
}

/// The config as recorded in the manifest: no file-system paths.
fn manifest_config(config: &RunConfig) -> ConfigFile {
    let mut file = config.to_file();
    file.output_dir = None;
    file.input_paths.clear();
    file.synthetic = None;
    file
}

fn ingest(
    run: &mut Run,
    stage: &str,
    label: &str,
    path: &Path,
) -> Result<(InputEntry, GridBuild), PipelineError> {
    let raw = fs::read(path)
        .map_err(|e| PipelineError::new(stage, ErrorKind::Data, format!("cannot read {}: {e}", path.display())))?;
    let input = InputEntry {
        label: label.to_string(),
        sha256: sha256_hex(&raw),
        bytes: raw.len() as u64,
    };
    let bars = parse_bars(raw.as_slice()).map_err(|e| e.at(stage))?;
    let scheme = &run.config.scheme;
    let build = build_day_grids(&bars, scheme, run.config.max_missing_fraction).map_err(|e| e.at(stage))?;
    if build.days.is_empty() {
        return Err(PipelineError::new(stage, ErrorKind::Data, "no usable days in input"));
    }

    let mut grid_bytes = Vec::new();
    write_grid_records(&build.days, &mut grid_bytes).map_err(|e| e.at(stage))?;
    run.write(stage, &format!("{label}/grids.jsonl"), &grid_bytes)?;

    let assignment = assign_periods(&build.days, scheme);
    let report = IngestReport {
        dataset: label.to_string(),
        bars: bars.len(),
        days: build.days.len(),
        excluded: build
            .excluded
            .iter()
            .map(|d| ExcludedDayRow {
                date: d.date,
                reason: d.reason.to_string(),
            })
            .collect(),
        period_counts: assignment
            .periods
            .iter()
            .map(|(p, days)| PeriodCount {
                period: p.clone(),
                days: days.len(),
            })
            .collect(),
        dropped_days: assignment.dropped,
        notices: build.notices.clone(),
    };
    run.write(stage, &format!("{label}/ingest.json"), &to_json(&report).map_err(|e| e.at(stage))?)?;
    for pc in &report.period_counts {
        if pc.days == 0 {
            run.warnings.push(format!("{stage}: no days in {}", pc.period));
        }
    }

    let daily: Vec<DailyPriceRow> = build
        .days
        .iter()
        .map(|d| DailyPriceRow {
            date: d.date,
            close: d.close_price(),
            log_return: d.daily_log_return(),
            missing_minutes: d.missing_count,
        })
        .collect();
    run.write(stage, &format!("{label}/daily_prices.csv"), &to_csv(&daily).map_err(|e| e.at(stage))?)?;
    Ok((input, build))
}

fn volatility(
    run: &mut Run,
    stage: &str,
    label: &str,
    grids: &GridBuild,
    emit: bool,
) -> Result<Vec<DailyVol>, PipelineError> {
    let vols = grids
        .days
        .par_iter()
        .map(daily_vol)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.at(stage))?;
    if !emit {
        return Ok(vols);
    }
    let rows: Vec<DailyVolRow> = vols
        .iter()
        .map(|v| DailyVolRow {
            date: v.date,
            sigma: v.sigma,
            sigma_gk: v.sigma_gk,
            clamped: v.clamped,
            clamped_gk: v.clamped_gk,
        })
        .collect();
    run.write(stage, &format!("{label}/daily_vol.csv"), &to_csv(&rows).map_err(|e| e.at(stage))?)?;

    let scheme = &run.config.scheme;
    let assignment = assign_periods(&vols, scheme);
    let baseline = assignment.baseline();
    if baseline.is_empty() {
        return Err(PipelineError::new(
            stage,
            ErrorKind::Data,
            format!("baseline period `{}` has no days", scheme.baseline().label),
        ));
    }
    let mut table = Vec::new();
    for estimator in [Estimator::Realized, Estimator::GarmanKlass] {
        for (period, days) in &assignment.periods {
            if days.is_empty() {
                continue;
            }
            let s = summarize_period(period, days, baseline, estimator).map_err(|e| e.at(stage))?;
            table.push(VolSummaryRow::new(estimator, &s));
        }
    }
    let report = VolSummaryTable {
        dataset: label.to_string(),
        baseline: scheme.baseline().label.clone(),
        difference: "period mean - baseline mean; Welch t-statistic".into(),
        rows: table,
    };
    run.write(stage, &format!("{label}/period_volatility.json"), &to_json(&report).map_err(|e| e.at(stage))?)?;
    run.write(stage, &format!("{label}/period_volatility.csv"), &to_csv(&report.rows).map_err(|e| e.at(stage))?)?;
    Ok(vols)
}

/// Period RMS amplitude vectors, in scheme order, for periods that have days.
type PeriodRms = Vec<(String, Vec<f64>)>;

fn spectrum(
    run: &mut Run,
    stage: &str,
    label: &str,
    grids: &GridBuild,
    dft: &DirectDft,
) -> Result<PeriodRms, PipelineError> {
    let spectra = grids
        .days
        .par_iter()
        .map(|d| amplitude_spectrum(dft, d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.at(stage))?;
    run.write(stage, &format!("{label}/spectra.csv"), &spectra_to_csv(&spectra).map_err(|e| e.at(stage))?)?;

    let scheme = &run.config.scheme;
    let assignment = assign_periods(&spectra, scheme);
    let mut rms = Vec::new();
    for (period, days) in &assignment.periods {
        if !days.is_empty() {
            rms.push((period.clone(), period_rms_amplitude(days).map_err(|e| e.at(stage))?));
        }
    }
    let baseline_label = &scheme.baseline().label;
    let Some((_, base)) = rms.iter().find(|(p, _)| p == baseline_label) else {
        return Err(PipelineError::new(
            stage,
            ErrorKind::Data,
            format!("baseline period `{baseline_label}` has no days"),
        ));
    };
    let mut rows = Vec::new();
    for (period, v) in &rms {
        let ratios = change_ratios(v, base).map_err(|e| e.at(stage))?;
        rows.extend(v.iter().zip(&ratios).enumerate().map(|(i, (a, r))| ChangeRatioRow {
            period: period.clone(),
            frequency: i + 1,
            rms_amplitude: *a,
            ratio: *r,
        }));
    }
    run.write(stage, &format!("{label}/change_ratios.csv"), &to_csv(&rows).map_err(|e| e.at(stage))?)?;
    Ok(rms)
}

fn bands(run: &mut Run, stage: &str, label: &str, rms: &PeriodRms) -> Result<(), PipelineError> {
    let baseline_label = run.config.scheme.baseline().label.clone();
    let base = &rms.iter().find(|(p, _)| *p == baseline_label).expect("checked by the spectrum stage").1;
    let mut rows = Vec::new();
    for (period, v) in rms.iter().filter(|(p, _)| *p != baseline_label) {
        let ratios = change_ratios(v, base).map_err(|e| e.at(stage))?;
        let reports = band_tests(&ratios).map_err(|e| e.at(stage))?;
        rows.extend(reports.iter().map(|r| BandRow::new(period, r)));
    }
    let table = BandTable {
        dataset: label.to_string(),
        baseline: baseline_label,
        rows,
    };
    run.write(stage, &format!("{label}/band_tests.json"), &to_json(&table).map_err(|e| e.at(stage))?)?;
    run.write(stage, &format!("{label}/band_tests.csv"), &to_csv(&table.rows).map_err(|e| e.at(stage))?)?;
    Ok(())
}

/// Daily close-to-close log returns × 100 over the scheme's date range. The
/// first day of a stream has no prior close and is left out.
pub fn msgarch_input(days: &[DayGrid], scheme: &PeriodScheme) -> Vec<(NaiveDate, f64)> {
    days.iter()
        .filter(|d| !d.boundary_from_first_price && d.date >= scheme.first_date() && d.date <= scheme.last_date())
        .map(|d| (d.date, 100.0 * d.daily_log_return()))
        .collect()
}

fn msgarch(run: &mut Run, stage: &str, label: &str, grids: &GridBuild) -> Result<(), PipelineError> {
    let series = msgarch_input(&grids.days, &run.config.scheme);
    let returns: Vec<f64> = series.iter().map(|(_, r)| *r).collect();
    let fit = fit_msgarch(&returns, &FitConfig::default()).map_err(|e| e.at(stage))?;
    if !fit.converged {
        run.flags.push(format!("{stage}: optimizer did not converge"));
    }
    for w in &fit.warnings {
        run.warnings.push(format!("{stage}: {w}"));
    }
    let report = MsGarchReport {
        dataset: label.to_string(),
        preprocessing: "daily close-to-close log returns x 100 over the period scheme's date range".into(),
        first_date: series[0].0,
        last_date: series[series.len() - 1].0,
        observations: returns.len(),
        params: fit.params,
        unconditional_variances: [
            fit.params.regimes[0].unconditional_variance(),
            fit.params.regimes[1].unconditional_variance(),
        ],
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
        iterations: fit.iterations,
        start_index: fit.start_index,
        starts: fit.starts.clone(),
        initial_variance: fit.initial_variance,
        single_regime: fit.single_regime.clone(),
        warnings: fit.warnings.clone(),
    };
    run.write(stage, &format!("{label}/msgarch.json"), &to_json(&report).map_err(|e| e.at(stage))?)?;
    let rows: Vec<RegimeProbRow> = series
        .iter()
        .zip(fit.smoothed_probs.iter().zip(&fit.filtered_probs))
        .map(|((date, r), (s, f))| RegimeProbRow {
            date: *date,
            scaled_return: *r,
            p_low: s[0],
            p_high: s[1],
            filtered_p_low: f[0],
            filtered_p_high: f[1],
        })
        .collect();
    run.write(stage, &format!("{label}/regime_probabilities.csv"), &to_csv(&rows).map_err(|e| e.at(stage))?)?;
    Ok(())
}

fn did(
    run: &mut Run,
    treatment: &str,
    control: &str,
    tv: &[DailyVol],
    cv: &[DailyVol],
) -> Result<(), PipelineError> {
    let scheme = run.config.scheme.clone();
    let baseline = &scheme.baseline().label;
    let mut rows = Vec::new();
    for period in &scheme.periods()[1..] {
        let stage = format!("did[{}]", period.label);
        let result = build_panel(tv, cv, &scheme, baseline, &period.label)
            .and_then(|panel| estimate_dd(&panel.rows).map(|est| DdRow::new(&period.label, &est, &panel)))
            .map_err(|e| e.at(&stage));
        if let Some(row) = run.record(&stage, result) {
            rows.push(row);
        }
    }
    let table = DdTable {
        treatment: treatment.to_string(),
        control: control.to_string(),
        baseline: baseline.clone(),
        dependent: "log realized volatility".into(),
        rows,
    };
    run.write("did", "did.json", &to_json(&table).map_err(|e| e.at("did"))?)?;
    run.write("did", "did.csv", &to_csv(&table.rows).map_err(|e| e.at("did"))?)?;
    Ok(())
}

/// Reads a manifest back.
pub fn read_manifest(path: &Path) -> Result<Manifest, TableError> {
    from_json(fs::File::open(path)?)
}
