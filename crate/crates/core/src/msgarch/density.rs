//! Standardized skewed Student-t innovations (Fernandez–Steel skewing).
//!
//! The base density is the unit-variance Student-t with `nu > 2` degrees of
//! freedom, skewed by `xi > 0` (scale `xi` to the right of the mode, `1/xi` to
//! the left), then recentred and rescaled to zero mean and unit variance. With
//! `xi = 1` it is the symmetric unit-variance Student-t.

use rand::Rng;
use rand_distr::{Distribution, StudentT};

use crate::dual::Real;

use super::MsGarchError;

/// Density constants for one `(nu, xi)` pair.
#[derive(Debug, Clone, Copy)]
pub struct SkewedT<S> {
    log_norm: S,
    mu: S,
    sigma: S,
    xi: S,
    inv_xi: S,
    half_nu_plus_one: S,
    inv_nu_minus_two: S,
}

/// `E|T|` for the unit-variance Student-t.
fn abs_moment<S: Real>(nu: S) -> S {
    let half = (nu + 1.0) * 0.5;
    let lg = half.ln_gamma() - (nu * 0.5).ln_gamma();
    (nu - 2.0).sqrt() * lg.exp() * 2.0 / ((nu - 1.0) * std::f64::consts::PI.sqrt())
}

impl<S: Real> SkewedT<S> {
    /// Callers guarantee `nu > 2` and `xi > 0`.
    pub fn new(nu: S, xi: S) -> Self {
        let inv_xi = xi.recip();
        let m1 = abs_moment(nu);
        let mu = m1 * (xi - inv_xi);
        let var = (S::cst(1.0) - m1 * m1) * (xi * xi + inv_xi * inv_xi) + m1 * m1 * 2.0 - 1.0;
        let sigma = var.sqrt();
        let half_nu_plus_one = (nu + 1.0) * 0.5;
        let log_norm = sigma.ln() + (S::cst(2.0) / (xi + inv_xi)).ln() + half_nu_plus_one.ln_gamma()
            - (nu * 0.5).ln_gamma()
            - ((nu - 2.0) * std::f64::consts::PI).ln() * 0.5;
        Self {
            log_norm,
            mu,
            sigma,
            xi,
            inv_xi,
            half_nu_plus_one,
            inv_nu_minus_two: (nu - 2.0).recip(),
        }
    }

    pub fn ln_pdf(&self, z: S) -> S {
        let x = self.mu + self.sigma * z;
        let y = if x.value() >= 0.0 { x * self.inv_xi } else { x * self.xi };
        self.log_norm - self.half_nu_plus_one * (y * y * self.inv_nu_minus_two + 1.0).ln()
    }

    /// Log density of `r` when its conditional variance is `h`.
    pub fn ln_pdf_scaled(&self, r: S, h: S) -> S {
        self.ln_pdf(r / h.sqrt()) - h.ln() * 0.5
    }
}

impl SkewedT<f64> {
    pub fn mean_shift(&self) -> f64 {
        self.mu
    }

    pub fn scale(&self) -> f64 {
        self.sigma
    }
}

pub(crate) fn check_shape(nu: f64, xi: f64) -> Result<(), MsGarchError> {
    if !(nu > 2.0) || !nu.is_finite() {
        return Err(MsGarchError::Domain(format!("tail parameter nu = {nu} must exceed 2")));
    }
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(MsGarchError::Domain(format!("skew parameter xi = {xi} must be positive")));
    }
    Ok(())
}

/// Standardized skewed Student-t density at `z`.
pub fn skewed_t_density(z: f64, nu: f64, xi: f64) -> Result<f64, MsGarchError> {
    check_shape(nu, xi)?;
    Ok(SkewedT::new(nu, xi).ln_pdf(z).exp())
}

/// Draws a standardized skewed Student-t variate.
pub fn sample_skewed_t<R: Rng + ?Sized>(nu: f64, xi: f64, dist: &SkewedT<f64>, rng: &mut R) -> f64 {
    let t: f64 = StudentT::new(nu).expect("nu > 2").sample(rng);
    let magnitude = (t * ((nu - 2.0) / nu).sqrt()).abs();
    let right = rng.random::<f64>() < xi / (xi + 1.0 / xi);
    let x = if right { magnitude * xi } else { -magnitude / xi };
    (x - dist.mean_shift()) / dist.scale()
}
