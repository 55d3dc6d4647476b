//! Variance recursions, the Hamilton filter and the Kim smoother.

use crate::dual::Real;
use crate::stats;

use super::density::SkewedT;
use super::{MsGarchError, MsGarchParams, RegimeParams};

/// One regime's parameters in likelihood scalar type `S`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RegimeSpec<S> {
    pub omega: S,
    pub alpha: S,
    pub gamma: S,
    pub beta: S,
    pub density: SkewedT<S>,
}

impl RegimeSpec<f64> {
    pub fn from_params(p: &RegimeParams) -> Self {
        Self {
            omega: p.omega,
            alpha: p.alpha,
            gamma: p.gamma,
            beta: p.beta,
            density: SkewedT::new(p.nu, p.xi),
        }
    }
}

impl<S: Real> RegimeSpec<S> {
    #[inline]
    fn next_variance(&self, h: S, r: f64) -> S {
        let shock = if r < 0.0 { self.alpha + self.gamma } else { self.alpha };
        self.omega + shock * (r * r) + self.beta * h
    }
}

pub(crate) fn check_returns(returns: &[f64], needed: usize) -> Result<(), MsGarchError> {
    if returns.len() < needed {
        return Err(MsGarchError::TooShort {
            needed,
            found: returns.len(),
        });
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(MsGarchError::NonFinite(i));
    }
    Ok(())
}

/// Sample variance of the returns, used to start every variance recursion.
pub(crate) fn initial_variance(returns: &[f64]) -> Result<f64, MsGarchError> {
    check_returns(returns, 2)?;
    match stats::sample_variance(returns) {
        Some(v) if v > 0.0 => Ok(v),
        _ => Err(MsGarchError::ZeroVariance),
    }
}

/// Conditional variance path of a single GJR regime started at `h1`.
pub fn gjr_variance_path(returns: &[f64], params: &RegimeParams, h1: f64) -> Result<Vec<f64>, MsGarchError> {
    if !(h1 > 0.0) || !h1.is_finite() {
        return Err(MsGarchError::Domain(format!("initial variance {h1} must be positive")));
    }
    if params.omega <= 0.0 || params.alpha < 0.0 || params.beta < 0.0 || params.alpha + params.gamma < 0.0 {
        return Err(MsGarchError::Domain("GJR positivity constraints violated".into()));
    }
    check_returns(returns, 0)?;
    let spec = RegimeSpec::from_params(params);
    let mut path = Vec::with_capacity(returns.len());
    let mut h = h1;
    for t in 0..returns.len() {
        if t > 0 {
            h = spec.next_variance(h, returns[t - 1]);
        }
        path.push(h);
    }
    Ok(path)
}

/// Single-regime log-likelihood in scalar type `S`.
pub(crate) fn single_loglik<S: Real>(returns: &[f64], h1: f64, spec: &RegimeSpec<S>) -> S {
    let mut h = S::cst(h1);
    let mut ll = S::cst(0.0);
    for (t, &r) in returns.iter().enumerate() {
        if t > 0 {
            h = spec.next_variance(h, returns[t - 1]);
        }
        ll += spec.density.ln_pdf_scaled(S::cst(r), h);
    }
    ll
}

/// Log-likelihood of a single-regime GJR model.
pub fn gjr_loglik(returns: &[f64], params: &RegimeParams, h1: f64) -> Result<f64, MsGarchError> {
    params.validate()?;
    check_returns(returns, 1)?;
    Ok(single_loglik(returns, h1, &RegimeSpec::from_params(params)))
}

/// Per-step regime probabilities recorded by the filter.
#[derive(Debug, Clone, Default)]
pub(crate) struct Trace {
    pub predicted: Vec<[f64; 2]>,
    pub filtered: Vec<[f64; 2]>,
}

/// Hamilton filter in scalar type `S`; returns the log-likelihood.
pub(crate) fn filter_generic<S: Real>(
    returns: &[f64],
    h1: f64,
    regimes: &[RegimeSpec<S>; 2],
    p11: S,
    p22: S,
    mut trace: Option<&mut Trace>,
) -> S {
    let one = S::cst(1.0);
    let (q1, q2) = (one - p11, one - p22);
    let denom = q1 + q2;
    let mut prob = [q2 / denom, q1 / denom];
    let mut h = [S::cst(h1), S::cst(h1)];
    let mut ll = S::cst(0.0);
    for (t, &r) in returns.iter().enumerate() {
        let pred = if t == 0 {
            prob
        } else {
            let prev = returns[t - 1];
            h = [regimes[0].next_variance(h[0], prev), regimes[1].next_variance(h[1], prev)];
            [
                p11 * prob[0] + (one - p22) * prob[1],
                (one - p11) * prob[0] + p22 * prob[1],
            ]
        };
        let lf = [
            regimes[0].density.ln_pdf_scaled(S::cst(r), h[0]),
            regimes[1].density.ln_pdf_scaled(S::cst(r), h[1]),
        ];
        let m = lf[0].value().max(lf[1].value());
        let w = [pred[0] * (lf[0] - m).exp(), pred[1] * (lf[1] - m).exp()];
        let total = w[0] + w[1];
        ll += total.ln() + m;
        prob = [w[0] / total, w[1] / total];
        if let Some(tr) = trace.as_deref_mut() {
            tr.predicted.push([pred[0].value(), pred[1].value()]);
            tr.filtered.push([prob[0].value(), prob[1].value()]);
        }
    }
    ll
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub log_likelihood: f64,
    /// `P(s_t = j | r_1..r_t)`.
    pub filtered: Vec<[f64; 2]>,
    /// `P(s_t = j | r_1..r_{t−1})`.
    pub predicted: Vec<[f64; 2]>,
}

/// Runs the filter with an explicit initial variance `h1` for both regimes.
pub fn hamilton_filter(returns: &[f64], params: &MsGarchParams, h1: f64) -> Result<FilterOutput, MsGarchError> {
    params.validate()?;
    check_returns(returns, 2)?;
    if !(h1 > 0.0) || !h1.is_finite() {
        return Err(MsGarchError::Domain(format!("initial variance {h1} must be positive")));
    }
    let specs = [
        RegimeSpec::from_params(&params.regimes[0]),
        RegimeSpec::from_params(&params.regimes[1]),
    ];
    let mut trace = Trace::default();
    let ll = filter_generic(returns, h1, &specs, params.p11, params.p22, Some(&mut trace));
    Ok(FilterOutput {
        log_likelihood: ll,
        filtered: trace.filtered,
        predicted: trace.predicted,
    })
}

/// Log-likelihood and filtered probabilities, with the recursions started at the
/// sample variance of `returns`.
pub fn hamilton_loglik(returns: &[f64], params: &MsGarchParams) -> Result<(f64, Vec<[f64; 2]>), MsGarchError> {
    let h1 = initial_variance(returns)?;
    let out = hamilton_filter(returns, params, h1)?;
    Ok((out.log_likelihood, out.filtered))
}

fn check_probabilities(rows: &[[f64; 2]]) -> Result<(), MsGarchError> {
    for (t, row) in rows.iter().enumerate() {
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-9 {
            return Err(MsGarchError::Probabilities(format!("row {t} is not a distribution: {row:?}")));
        }
    }
    Ok(())
}

/// Backward pass turning filtered into full-sample regime probabilities.
pub fn kim_smoother(filtered: &[[f64; 2]], params: &MsGarchParams) -> Result<Vec<[f64; 2]>, MsGarchError> {
    params.validate_closed()?;
    check_probabilities(filtered)?;
    let n = filtered.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let p = params.transition();
    let mut smoothed = vec![[0.0; 2]; n];
    smoothed[n - 1] = filtered[n - 1];
    for t in (0..n - 1).rev() {
        let f = filtered[t];
        let pred = [
            p[0][0] * f[0] + p[1][0] * f[1],
            p[0][1] * f[0] + p[1][1] * f[1],
        ];
        let ratio = |j: usize| {
            if pred[j] > 0.0 {
                smoothed[t + 1][j] / pred[j]
            } else {
                0.0
            }
        };
        let (r0, r1) = (ratio(0), ratio(1));
        let mut row = [
            f[0] * (p[0][0] * r0 + p[0][1] * r1),
            f[1] * (p[1][0] * r0 + p[1][1] * r1),
        ];
        let total = row[0] + row[1];
        row[0] /= total;
        row[1] = 1.0 - row[0];
        smoothed[t] = row;
    }
    Ok(smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime(omega: f64, alpha: f64, gamma: f64, beta: f64) -> RegimeParams {
        RegimeParams {
            omega,
            alpha,
            gamma,
            beta,
            nu: 6.0,
            xi: 1.1,
        }
    }

    #[test]
    fn constant_variance_when_dynamics_off() {
        let r = [0.5, -1.0, 2.0, -0.1];
        let path = gjr_variance_path(&r, &regime(0.3, 0.0, 0.0, 0.0), 0.3).unwrap();
        assert!(path.iter().all(|&h| h == 0.3));
    }

    #[test]
    fn one_step_asymmetry() {
        let p = regime(0.1, 0.05, 0.1, 0.8);
        let down = gjr_variance_path(&[-1.0, 0.0], &p, 1.0).unwrap();
        assert!((down[1] - 1.05).abs() < 1e-15);
        let up = gjr_variance_path(&[1.0, 0.0], &p, 1.0).unwrap();
        assert!((up[1] - 0.95).abs() < 1e-15);
        assert!(matches!(
            gjr_variance_path(&[f64::NAN], &p, 1.0),
            Err(MsGarchError::NonFinite(0))
        ));
        assert!(gjr_variance_path(&[1.0], &p, 0.0).is_err());
    }

    #[test]
    fn identical_regimes_collapse_to_single() {
        let reg = regime(0.1, 0.05, 0.1, 0.8);
        let params = MsGarchParams {
            regimes: [reg, reg],
            p11: 0.9,
            p22: 0.7,
        };
        let r: Vec<f64> = (0..200).map(|i| ((i * 37 % 23) as f64 - 11.0) / 7.0).collect();
        let out = hamilton_filter(&r, &params, 1.3).unwrap();
        let single = gjr_loglik(&r, &reg, 1.3).unwrap();
        assert!((out.log_likelihood - single).abs() < 1e-10);
        let pi = params.stationary();
        for row in &out.filtered {
            assert!((row[0] - pi[0]).abs() < 1e-12);
        }
        let smoothed = kim_smoother(&out.filtered, &params).unwrap();
        for row in &smoothed {
            assert!((row[0] - pi[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_chain_starts_even() {
        let reg = regime(0.1, 0.05, 0.1, 0.8);
        let params = MsGarchParams {
            regimes: [reg, regime(1.0, 0.1, 0.0, 0.5)],
            p11: 0.5,
            p22: 0.5,
        };
        assert_eq!(params.stationary(), [0.5, 0.5]);
        let out = hamilton_filter(&[0.3, -0.2, 0.1], &params, 1.0).unwrap();
        assert_eq!(out.predicted[0], [0.5, 0.5]);
    }

    #[test]
    fn smoother_rejects_bad_rows() {
        let reg = regime(0.1, 0.05, 0.1, 0.8);
        let params = MsGarchParams {
            regimes: [reg, reg],
            p11: 0.9,
            p22: 0.9,
        };
        assert!(kim_smoother(&[[0.7, 0.7]], &params).is_err());
        assert!(kim_smoother(&[[1.2, -0.2]], &params).is_err());
    }
}
