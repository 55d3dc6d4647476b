//! Run configuration and its TOML file format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::market_data::{AnalysisTz, Period, PeriodScheme, DEFAULT_MAX_MISSING_FRACTION};
use crate::synthetic::SyntheticConfig;

use super::{ErrorKind, PipelineError};

/// On-disk form of a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub label: String,
    /// ISO-8601 date, inclusive.
    pub start: String,
    /// ISO-8601 date, inclusive.
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub timezone: Option<String>,
    #[serde(default)]
    pub periods: Vec<PeriodSpec>,
}

/// The config file. Keys mirror [`RunConfig`]; everything is optional and
/// command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub input_paths: BTreeMap<String, PathBuf>,
    pub treatment_label: Option<String>,
    pub control_label: Option<String>,
    pub scheme: Option<SchemeSpec>,
    pub max_missing_fraction: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub synthetic: Option<SyntheticConfig>,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::config(format!("config file: {e}")))
    }

    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut file = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in file.input_paths.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = file.output_dir.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_paths: BTreeMap<String, PathBuf>,
    pub treatment_label: Option<String>,
    pub control_label: Option<String>,
    pub scheme: PeriodScheme,
    pub max_missing_fraction: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub synthetic: SyntheticConfig,
}

fn parse_date(s: &str, what: &str) -> Result<NaiveDate, PipelineError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| PipelineError::config(format!("{what}: `{s}` is not an ISO-8601 date (YYYY-MM-DD)")))
}

/// Labels become directory names in the output.
fn check_label(label: &str) -> Result<(), PipelineError> {
    let ok = !label.is_empty()
        && label != "."
        && label != ".."
        && label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(PipelineError::config(format!(
            "label `{label}` may only contain ASCII letters, digits, `-`, `_` and `.`"
        )))
    }
}

impl RunConfig {
    /// Builds a validated config. Without periods the futures-launch scheme is used.
    pub fn from_file(file: ConfigFile) -> Result<Self, PipelineError> {
        let spec = file.scheme.unwrap_or_default();
        let tz = match &spec.timezone {
            Some(name) => name.parse::<AnalysisTz>().map_err(|e| PipelineError::config(e.to_string()))?,
            None => AnalysisTz::default(),
        };
        let scheme = if spec.periods.is_empty() {
            PeriodScheme::futures_launch_2017().with_timezone(tz)
        } else {
            let periods = spec
                .periods
                .iter()
                .map(|p| {
                    Ok(Period::new(
                        p.label.clone(),
                        parse_date(&p.start, &format!("period `{}` start", p.label))?,
                        parse_date(&p.end, &format!("period `{}` end", p.label))?,
                    ))
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            PeriodScheme::new(periods, tz).map_err(|e| PipelineError::config(e.to_string()))?
        };
        let config = Self {
            input_paths: file.input_paths,
            treatment_label: file.treatment_label,
            control_label: file.control_label,
            scheme,
            max_missing_fraction: file.max_missing_fraction.unwrap_or(DEFAULT_MAX_MISSING_FRACTION),
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("volstudy-out")),
            seed: file.seed.unwrap_or(1),
            synthetic: file.synthetic.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(PipelineError::config(format!(
                "maxMissingFraction {} must lie in [0, 1]",
                self.max_missing_fraction
            )));
        }
        for label in self.input_paths.keys() {
            check_label(label)?;
        }
        if let (Some(t), Some(c)) = (&self.treatment_label, &self.control_label) {
            if t == c {
                return Err(PipelineError::config(format!(
                    "treatment and control labels are both `{t}`"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the difference-in-differences stage has what it needs.
    pub fn dd_labels(&self) -> Result<(&str, &str), PipelineError> {
        fn need<'a>(cfg: &'a RunConfig, label: &'a Option<String>, role: &str) -> Result<&'a str, PipelineError> {
            let l = label
                .as_deref()
                .ok_or_else(|| PipelineError::config(format!("difference-in-differences needs a {role} label")))?;
            if !cfg.input_paths.contains_key(l) {
                return Err(PipelineError::config(format!(
                    "{role} label `{l}` has no entry in inputPaths"
                )));
            }
            Ok(l)
        }
        let t = need(self, &self.treatment_label, "treatment")?;
        let c = need(self, &self.control_label, "control")?;
        if t == c {
            return Err(PipelineError::config(format!("treatment and control labels are both `{t}`")));
        }
        Ok((t, c))
    }

    /// The config as a file, for writing alongside generated data.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            input_paths: self.input_paths.clone(),
            treatment_label: self.treatment_label.clone(),
            control_label: self.control_label.clone(),
            scheme: Some(SchemeSpec {
                timezone: Some(self.scheme.timezone().to_string()),
                periods: self
                    .scheme
                    .periods()
                    .iter()
                    .map(|p| PeriodSpec {
                        label: p.label.clone(),
                        start: p.start.to_string(),
                        end: p.end.to_string(),
                    })
                    .collect(),
            }),
            max_missing_fraction: Some(self.max_missing_fraction),
            output_dir: Some(self.output_dir.clone()),
            seed: Some(self.seed),
            synthetic: Some(self.synthetic.clone()),
        }
    }
}

impl PipelineError {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Self {
            stage: "config".into(),
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }
}
