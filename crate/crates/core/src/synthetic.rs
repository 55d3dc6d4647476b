//! Synthetic minute-bar streams with known per-period volatility.
//!
//! Log prices follow a Gaussian random walk at one-minute resolution. Each
//! civil day draws a lognormal volatility level around `daily_vol`, scaled by
//! the multiplier of the period the day falls in (1 outside all periods). The
//! treatment and control streams share a correlated shock and carry separate
//! multipliers, so a treatment-only effect can be planted for the
//! difference-in-differences stage.

use chrono::Duration;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{MinuteBar, PeriodScheme, MINUTES_PER_DAY};

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("expected {expected} {which} multipliers (one per period), got {found}")]
    MultiplierCount {
        which: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("correlation {0} must lie in [-1, 1]")]
    Correlation(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SyntheticConfig {
    /// One factor per period for the treatment stream. Empty means all 1.
    pub treatment_multipliers: Vec<f64>,
    /// One factor per period for the control stream. Empty means all 1.
    pub control_multipliers: Vec<f64>,
    /// Correlation of the two streams' minute shocks.
    pub correlation: f64,
    /// Typical daily standard deviation of log returns.
    pub daily_vol: f64,
    /// Standard deviation of the day-level log volatility.
    pub day_jitter: f64,
    pub start_price: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            treatment_multipliers: Vec::new(),
            control_multipliers: Vec::new(),
            correlation: 0.5,
            daily_vol: 0.04,
            day_jitter: 0.25,
            start_price: 5000.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub treatment: Vec<MinuteBar>,
    pub control: Vec<MinuteBar>,
}

fn multipliers(
    given: &[f64],
    periods: usize,
    which: &'static str,
) -> Result<Vec<f64>, SyntheticError> {
    if given.is_empty() {
        return Ok(vec![1.0; periods]);
    }
    if given.len() != periods {
        return Err(SyntheticError::MultiplierCount {
            which,
            expected: periods,
            found: given.len(),
        });
    }
    if given.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(SyntheticError::NotPositive("volatility multiplier"));
    }
    Ok(given.to_vec())
}

struct Walker {
    price: f64,
}

impl Walker {
    /// Advances one minute by log return `r`, with a wick of relative size `wick`
    /// beyond the open/close range on each side.
    fn step(&mut self, timestamp: i64, r: f64, wick: [f64; 2]) -> MinuteBar {
        let open = self.price;
        let close = open * r.exp();
        self.price = close;
        MinuteBar {
            timestamp,
            open,
            high: open.max(close) * wick[0].exp(),
            low: open.min(close) * (-wick[1]).exp(),
            close,
        }
    }
}

/// Generates treatment and control minute bars covering every civil day of the
/// scheme, in the scheme's timezone.
pub fn generate_synthetic(
    scheme: &PeriodScheme,
    config: &SyntheticConfig,
) -> Result<SyntheticData, SyntheticError> {
    let n = scheme.periods().len();
    let treat_mult = multipliers(&config.treatment_multipliers, n, "treatment")?;
    let ctrl_mult = multipliers(&config.control_multipliers, n, "control")?;
    for (value, name) in [(config.daily_vol, "daily volatility"), (config.start_price, "start price")] {
        if !(value.is_finite() && value > 0.0) {
            return Err(SyntheticError::NotPositive(name));
        }
    }
    if !(config.day_jitter.is_finite() && config.day_jitter >= 0.0) {
        return Err(SyntheticError::NotPositive("day jitter"));
    }
    let rho = config.correlation;
    if !(-1.0..=1.0).contains(&rho) {
        return Err(SyntheticError::Correlation(rho));
    }
    let rho_c = (1.0 - rho * rho).sqrt();

    let tz = scheme.timezone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let minute_scale = 1.0 / (MINUTES_PER_DAY as f64).sqrt();
    let jitter_mean = -0.5 * config.day_jitter * config.day_jitter;

    let mut treat = Walker { price: config.start_price };
    let mut ctrl = Walker { price: config.start_price };
    let mut out = SyntheticData {
        treatment: Vec::new(),
        control: Vec::new(),
    };
    let mut date = scheme.first_date();
    while date <= scheme.last_date() {
        let idx = scheme.periods().iter().position(|p| p.contains(date));
        let (mt, mc) = idx.map_or((1.0, 1.0), |i| (treat_mult[i], ctrl_mult[i]));
        let day_t = config.daily_vol * mt * (jitter_mean + config.day_jitter * normal()).exp();
        let day_c = config.daily_vol * mc * (jitter_mean + config.day_jitter * normal()).exp();
        let (st, sc) = (day_t * minute_scale, day_c * minute_scale);

        let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight");
        let next = date.succ_opt().expect("date in range").and_hms_opt(0, 0, 0).expect("valid midnight");
        let (start, end) = (tz.timestamp_of(midnight), tz.timestamp_of(next));
        let mut ts = start;
        while ts < end {
            let common = normal();
            let own = normal();
            let zt = common;
            let zc = rho * common + rho_c * own;
            let wick_t = [0.5 * st * normal().abs(), 0.5 * st * normal().abs()];
            let wick_c = [0.5 * sc * normal().abs(), 0.5 * sc * normal().abs()];
            out.treatment.push(treat.step(ts, st * zt, wick_t));
            out.control.push(ctrl.step(ts, sc * zc, wick_c));
            ts += 60;
        }
        date = next.date();
        debug_assert!(next > midnight + Duration::hours(22));
    }
    Ok(out)
}
