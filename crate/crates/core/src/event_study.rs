//! Difference-in-differences regression on daily log volatility.
//!
//! For a baseline period and one post-event period, each treatment and control
//! day contributes a row `log σ = α + β1·post + β2·treat + β3·post·treat + ε`.
//! The design is saturated, so the coefficients are the four cell means
//! recombined; estimation still goes through a general least-squares solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{Dated, PeriodScheme};
use crate::vol::DailyVol;

pub const PARAMETERS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum DdError {
    #[error("unknown period `{0}`")]
    UnknownPeriod(String),
    #[error("{0} series has no usable days in the two periods")]
    EmptySeries(&'static str),
    #[error("design is rank-deficient: no observations for {0}")]
    EmptyCell(Cell),
    #[error("{0} observations are too few for {PARAMETERS} parameters")]
    TooFewObservations(usize),
    #[error("design matrix is numerically singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub log_sigma: f64,
    pub period_dummy: u8,
    pub treatment_dummy: u8,
    pub interaction: u8,
}

impl PanelRow {
    pub fn new(log_sigma: f64, post: bool, treated: bool) -> Self {
        Self {
            log_sigma,
            period_dummy: post as u8,
            treatment_dummy: treated as u8,
            interaction: (post && treated) as u8,
        }
    }

    fn cell(&self) -> Cell {
        Cell {
            post: self.period_dummy == 1,
            treated: self.treatment_dummy == 1,
        }
    }
}

/// One of the four (period, group) combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub post: bool,
    pub treated: bool,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} / {}",
            if self.treated { "treatment" } else { "control" },
            if self.post { "event period" } else { "baseline" }
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub rows: Vec<PanelRow>,
    /// Days in the two periods dropped because σ was not positive.
    pub excluded: usize,
}

/// Stacks treatment and control days from the baseline and one event period.
///
/// Clamped or zero-volatility days have no log and are dropped. Days outside the
/// two periods are ignored. Series need not share dates.
pub fn build_panel(
    treatment: &[DailyVol],
    control: &[DailyVol],
    scheme: &PeriodScheme,
    baseline_label: &str,
    period_label: &str,
) -> Result<Panel, DdError> {
    let find = |label: &str| {
        scheme
            .periods()
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| DdError::UnknownPeriod(label.to_string()))
    };
    let base = find(baseline_label)?;
    let post = find(period_label)?;
    let mut panel = Panel::default();
    for (series, treated, name) in [(treatment, true, "treatment"), (control, false, "control")] {
        let before = panel.rows.len();
        for v in series {
            let is_post = if post.contains(v.date()) {
                true
            } else if base.contains(v.date()) {
                false
            } else {
                continue;
            };
            if v.clamped || v.sigma <= 0.0 || !v.sigma.is_finite() {
                panel.excluded += 1;
                continue;
            }
            panel.rows.push(PanelRow::new(v.sigma.ln(), is_post, treated));
        }
        if panel.rows.len() == before {
            return Err(DdError::EmptySeries(name));
        }
    }
    Ok(panel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DdEstimate {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub std_errors: [f64; PARAMETERS],
    /// `None` where the standard error is zero (perfect fit).
    pub t_stats: [Option<f64>; PARAMETERS],
    pub n_obs: usize,
    pub residual_variance: f64,
}

impl DdEstimate {
    pub fn coefficients(&self) -> [f64; PARAMETERS] {
        [self.alpha, self.beta1, self.beta2, self.beta3]
    }
}

/// OLS with classical homoskedastic standard errors.
pub fn estimate_dd(rows: &[PanelRow]) -> Result<DdEstimate, DdError> {
    for treated in [false, true] {
        for post in [false, true] {
            let cell = Cell { post, treated };
            if !rows.iter().any(|r| r.cell() == cell) {
                return Err(DdError::EmptyCell(cell));
            }
        }
    }
    let n = rows.len();
    if n <= PARAMETERS {
        return Err(DdError::TooFewObservations(n));
    }

    let x = DMatrix::from_fn(n, PARAMETERS, |i, j| match j {
        0 => 1.0,
        1 => rows[i].period_dummy as f64,
        2 => rows[i].treatment_dummy as f64,
        _ => rows[i].interaction as f64,
    });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.log_sigma));

    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &y;
    let coef = r.solve_upper_triangular(&qty).ok_or(DdError::Singular)?;

    let resid = &y - &x * &coef;
    let rss = resid.norm_squared();
    let residual_variance = rss / (n - PARAMETERS) as f64;
    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(PARAMETERS, PARAMETERS))
        .ok_or(DdError::Singular)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let mut std_errors = [0.0; PARAMETERS];
    let mut t_stats = [None; PARAMETERS];
    for j in 0..PARAMETERS {
        std_errors[j] = (residual_variance * xtx_inv[(j, j)]).sqrt();
        if std_errors[j] > 0.0 {
            t_stats[j] = Some(coef[j] / std_errors[j]);
        }
    }
    Ok(DdEstimate {
        alpha: coef[0],
        beta1: coef[1],
        beta2: coef[2],
        beta3: coef[3],
        std_errors,
        t_stats,
        n_obs: n,
        residual_variance,
    })
}
