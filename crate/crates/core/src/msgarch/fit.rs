//! Maximum-likelihood estimation on an unconstrained reparameterization.
//!
//! Per regime the optimizer sees six free coordinates:
//!
//! | coordinate | maps to |
//! |---|---|
//! | `θ0` | `ln omega = OMEGA_LOG_BOUND·(2·logistic(θ0) − 1)` |
//! | `θ1..θ3` | softmax weights `(w1, w2, w3, slack)` against a fixed zero logit; `alpha = 2·w1`, `alpha + gamma = 2·w2`, `beta = w3` |
//! | `θ4` | `nu = NU_MIN + (NU_MAX − NU_MIN)·logistic(θ4)` |
//! | `θ5` | `ln xi = XI_LOG_BOUND·(2·logistic(θ5) − 1)` |
//!
//! so positivity and `alpha + gamma/2 + beta = w1 + w2 + w3 < 1` hold for every
//! real vector. The two stay probabilities are logistic transforms. Gradients
//! come from forward-mode dual numbers through the exact filter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Real};
use crate::optim::{bfgs, BfgsConfig};

use super::density::SkewedT;
use super::filter::{filter_generic, initial_variance, single_loglik, RegimeSpec, Trace};
use super::{kim_smoother, MsGarchError, MsGarchParams, RegimeParams};

const REGIME_DIM: usize = 6;
/// Free coordinates of the two-regime model.
pub const REPARAM_DIM: usize = 2 * REGIME_DIM + 2;
const NU_MIN: f64 = 2.05;
const NU_MAX: f64 = 100.0;
/// `|ln omega| < 30`.
const OMEGA_LOG_BOUND: f64 = 30.0;
/// `|ln xi| < ln 20`.
const XI_LOG_BOUND: f64 = 2.995_732_273_553_991;
/// Below this many observations the fit carries a warning.
pub const RECOMMENDED_MIN_OBS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub bfgs: BfgsConfig,
    /// Number of the fixed start points to use (at most 8).
    pub starts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bfgs: BfgsConfig {
                max_iterations: 500,
                f_tol: 1e-8,
                g_tol: 1e-6,
            },
            starts: 8,
        }
    }
}

fn logistic<S: Real>(x: S) -> S {
    if x.value() >= 0.0 {
        ((-x).exp() + 1.0).recip()
    } else {
        let e = x.exp();
        e / (e + 1.0)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse of `x ↦ 2·logistic(x) − 1`, clamped inside `(−1, 1)`.
fn symmetric_logit(y: f64) -> f64 {
    logit((y.clamp(-1.0 + 1e-9, 1.0 - 1e-9) + 1.0) / 2.0)
}

struct Decoded<S> {
    omega: S,
    alpha: S,
    gamma: S,
    beta: S,
    nu: S,
    xi: S,
}

fn decode_regime<S: Real>(th: &[S]) -> Decoded<S> {
    let m = th[1..4].iter().fold(0.0f64, |m, v| m.max(v.value()));
    let e = [(th[1] - m).exp(), (th[2] - m).exp(), (th[3] - m).exp()];
    let slack = S::cst((-m).exp());
    let total = e[0] + e[1] + e[2] + slack;
    let w = [e[0] / total, e[1] / total, e[2] / total];
    let alpha = w[0] * 2.0;
    Decoded {
        omega: ((logistic(th[0]) * 2.0 - 1.0) * OMEGA_LOG_BOUND).exp(),
        alpha,
        gamma: w[1] * 2.0 - alpha,
        beta: w[2],
        nu: logistic(th[4]) * (NU_MAX - NU_MIN) + NU_MIN,
        xi: ((logistic(th[5]) * 2.0 - 1.0) * XI_LOG_BOUND).exp(),
    }
}

impl<S: Real> Decoded<S> {
    fn spec(&self) -> RegimeSpec<S> {
        RegimeSpec {
            omega: self.omega,
            alpha: self.alpha,
            gamma: self.gamma,
            beta: self.beta,
            density: SkewedT::new(self.nu, self.xi),
        }
    }
}

impl Decoded<f64> {
    fn params(&self) -> RegimeParams {
        RegimeParams {
            omega: self.omega,
            alpha: self.alpha,
            gamma: self.gamma,
            beta: self.beta,
            nu: self.nu,
            xi: self.xi,
        }
    }
}

/// Inverse of `decode_regime`, nudging boundary values into the interior.
fn encode_regime(p: &RegimeParams) -> [f64; REGIME_DIM] {
    const FLOOR: f64 = 1e-4;
    let mut w = [
        (p.alpha / 2.0).max(FLOOR),
        ((p.alpha + p.gamma) / 2.0).max(FLOOR),
        p.beta.max(FLOOR),
        (1.0 - p.persistence()).max(FLOOR),
    ];
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    let nu_frac = ((p.nu - NU_MIN) / (NU_MAX - NU_MIN)).clamp(1e-6, 1.0 - 1e-6);
    [
        symmetric_logit(p.omega.ln() / OMEGA_LOG_BOUND),
        (w[0] / w[3]).ln(),
        (w[1] / w[3]).ln(),
        (w[2] / w[3]).ln(),
        logit(nu_frac),
        symmetric_logit(p.xi.ln() / XI_LOG_BOUND),
    ]
}

/// Maps an unconstrained vector to model parameters.
pub fn decode(theta: &[f64; REPARAM_DIM]) -> MsGarchParams {
    MsGarchParams {
        regimes: [
            decode_regime(&theta[..REGIME_DIM]).params(),
            decode_regime(&theta[REGIME_DIM..2 * REGIME_DIM]).params(),
        ],
        p11: logistic(theta[12]),
        p22: logistic(theta[13]),
    }
}

pub fn encode(params: &MsGarchParams) -> [f64; REPARAM_DIM] {
    let mut th = [0.0; REPARAM_DIM];
    th[..REGIME_DIM].copy_from_slice(&encode_regime(&params.regimes[0]));
    th[REGIME_DIM..2 * REGIME_DIM].copy_from_slice(&encode_regime(&params.regimes[1]));
    th[12] = logit(params.p11.clamp(1e-6, 1.0 - 1e-6));
    th[13] = logit(params.p22.clamp(1e-6, 1.0 - 1e-6));
    th
}

/// Two-regime log-likelihood in scalar type `S` at unconstrained coordinates.
fn ms_loglik_theta<S: Real>(returns: &[f64], h1: f64, theta: &[S]) -> S {
    let specs = [
        decode_regime(&theta[..REGIME_DIM]).spec(),
        decode_regime(&theta[REGIME_DIM..2 * REGIME_DIM]).spec(),
    ];
    filter_generic(returns, h1, &specs, logistic(theta[12]), logistic(theta[13]), None)
}

/// Average negative log-likelihood and its exact gradient in unconstrained coordinates.
pub fn ms_objective(returns: &[f64], h1: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let seeded: Vec<Dual<REPARAM_DIM>> = theta
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(v, i))
        .collect();
    let ll = ms_loglik_theta(returns, h1, &seeded);
    let scale = -1.0 / returns.len() as f64;
    (ll.v * scale, ll.d.iter().map(|g| g * scale).collect())
}

/// Objective value only, for finite-difference checks.
pub fn ms_objective_value(returns: &[f64], h1: f64, theta: &[f64]) -> f64 {
    -ms_loglik_theta(returns, h1, theta) / returns.len() as f64
}

fn gjr_objective(returns: &[f64], h1: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let seeded: Vec<Dual<REGIME_DIM>> = theta
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(v, i))
        .collect();
    let ll = single_loglik(returns, h1, &decode_regime(&seeded).spec());
    let scale = -1.0 / returns.len() as f64;
    (ll.v * scale, ll.d.iter().map(|g| g * scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GjrFit {
    pub params: RegimeParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn validate_series(returns: &[f64]) -> Result<(f64, Vec<String>), MsGarchError> {
    let h1 = initial_variance(returns)?;
    let mut warnings = Vec::new();
    if returns.len() < RECOMMENDED_MIN_OBS {
        warnings.push(format!(
            "only {} observations; at least {RECOMMENDED_MIN_OBS} are recommended",
            returns.len()
        ));
    }
    Ok((h1, warnings))
}

fn regime_start(variance: f64, alpha: f64, gamma: f64, beta: f64, nu: f64, xi: f64) -> RegimeParams {
    let persistence = alpha + 0.5 * gamma + beta;
    RegimeParams {
        omega: variance * (1.0 - persistence),
        alpha,
        gamma,
        beta,
        nu,
        xi,
    }
}

/// Single-regime GJR fit, from two fixed starts.
pub fn fit_gjr(returns: &[f64], config: &FitConfig) -> Result<GjrFit, MsGarchError> {
    let (h1, _) = validate_series(returns)?;
    let starts = [
        regime_start(h1, 0.05, 0.05, 0.85, 6.0, 1.0),
        regime_start(h1, 0.10, 0.05, 0.50, 6.0, 1.0),
    ];
    let best = starts
        .iter()
        .map(|s| bfgs(|th| gjr_objective(returns, h1, th), &encode_regime(s), &config.bfgs))
        .enumerate()
        .min_by(|(i, a), (j, b)| a.f.total_cmp(&b.f).then(i.cmp(j)))
        .map(|(_, m)| m)
        .expect("two starts");
    Ok(GjrFit {
        params: decode_regime(&best.x).params(),
        log_likelihood: -best.f * returns.len() as f64,
        converged: best.converged,
        iterations: best.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StartSummary {
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MsGarchFit {
    /// Regime 1 has the lower unconditional variance.
    pub params: MsGarchParams,
    pub log_likelihood: f64,
    pub filtered_probs: Vec<[f64; 2]>,
    pub smoothed_probs: Vec<[f64; 2]>,
    pub converged: bool,
    pub iterations: usize,
    /// Index of the winning start point.
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
    pub initial_variance: f64,
    /// Single-regime fit the start points were built around.
    pub single_regime: GjrFit,
    pub warnings: Vec<String>,
}

/// The eight fixed start points.
///
/// Start 0 puts both regimes at the single-regime estimate, so the two-regime
/// fit never ends below the nested model. Starts 1–5 split the sample variance
/// into a calm and a turbulent regime with weak GARCH dynamics, close to a
/// switching constant-variance model. Starts 6–7 split with the single fit's
/// own dynamics.
fn start_points(single: &RegimeParams, sample_var: f64) -> Vec<MsGarchParams> {
    let own = (single.alpha.max(0.02), single.gamma.max(0.02), single.beta.clamp(0.05, 0.9));
    let weak = (0.03, 0.02, 0.5);
    let mut out = vec![MsGarchParams {
        regimes: [*single, *single],
        p11: 0.9,
        p22: 0.9,
    }];
    let make = |(lo, hi): (f64, f64), (a, g, b): (f64, f64, f64)| {
        let (a, g, b) = if a + 0.5 * g + b > 0.98 { (a, g, 0.98 - a - 0.5 * g) } else { (a, g, b) };
        MsGarchParams {
            regimes: [
                regime_start(sample_var * lo, a, g, b, single.nu, single.xi),
                regime_start(sample_var * hi, a, g, b, single.nu, single.xi),
            ],
            p11: 0.95,
            p22: 0.95,
        }
    };
    for split in [(0.25, 2.0), (0.1, 1.5), (0.5, 3.0), (0.2, 5.0), (0.4, 1.6)] {
        out.push(make(split, weak));
    }
    for split in [(0.5, 2.0), (0.3, 3.0)] {
        out.push(make(split, own));
    }
    out
}

/// Maximum-likelihood fit of the two-regime model.
///
/// Deterministic: the start points are a fixed function of the data and the
/// best start wins, ties going to the lowest index.
pub fn fit_msgarch(returns: &[f64], config: &FitConfig) -> Result<MsGarchFit, MsGarchError> {
    let (h1, warnings) = validate_series(returns)?;
    let single = fit_gjr(returns, config)?;
    let starts: Vec<_> = start_points(&single.params, h1)
        .into_iter()
        .take(config.starts.clamp(1, 8))
        .collect();
    let results: Vec<_> = starts
        .par_iter()
        .map(|s| bfgs(|th| ms_objective(returns, h1, th), &encode(s), &config.bfgs))
        .collect();
    let (start_index, best) = results
        .iter()
        .enumerate()
        .filter(|(_, m)| m.f.is_finite())
        .min_by(|(i, a), (j, b)| a.f.total_cmp(&b.f).then(i.cmp(j)))
        .ok_or_else(|| MsGarchError::Domain("no start produced a finite likelihood".into()))?;

    let theta: [f64; REPARAM_DIM] = best.x.clone().try_into().expect("dimension");
    let mut params = decode(&theta);
    let specs = [
        RegimeSpec::from_params(&params.regimes[0]),
        RegimeSpec::from_params(&params.regimes[1]),
    ];
    let mut trace = Trace::default();
    let log_likelihood = filter_generic(returns, h1, &specs, params.p11, params.p22, Some(&mut trace));
    let mut filtered = trace.filtered;
    let mut smoothed = kim_smoother(&filtered, &params)?;
    if params.regimes[0].unconditional_variance() > params.regimes[1].unconditional_variance() {
        params = params.swapped();
        for row in filtered.iter_mut().chain(smoothed.iter_mut()) {
            row.swap(0, 1);
        }
    }
    let n = returns.len() as f64;
    Ok(MsGarchFit {
        params,
        log_likelihood,
        filtered_probs: filtered,
        smoothed_probs: smoothed,
        converged: best.converged,
        iterations: best.iterations,
        start_index,
        starts: results
            .iter()
            .map(|m| StartSummary {
                log_likelihood: -m.f * n,
                converged: m.converged,
                iterations: m.iterations,
            })
            .collect(),
        initial_variance: h1,
        single_regime: single,
        warnings,
    })
}
