//! Two-regime Markov-switching GJR-GARCH with skewed Student-t innovations.
//!
//! Each regime `j` carries its own conditional variance, driven by the observed
//! returns whatever the active regime:
//!
//! ```text
//! h[j, t] = omega_j + (alpha_j + gamma_j · 1{r[t-1] < 0}) · r[t-1]² + beta_j · h[j, t-1]
//! r[t] | s_t = j  ~  sqrt(h[j, t]) · z,   z ~ skewed Student-t(nu_j, xi_j)
//! ```
//!
//! and the regime `s_t` is a first-order Markov chain with stay probabilities
//! `p11`, `p22`. Because the variance paths do not depend on the regime path the
//! likelihood is evaluated exactly by the Hamilton filter in O(T).

mod density;
mod filter;
mod fit;
mod simulate;

pub use density::{sample_skewed_t, skewed_t_density, SkewedT};
pub use filter::{
    gjr_loglik, gjr_variance_path, hamilton_filter, hamilton_loglik, kim_smoother, FilterOutput,
};
pub use fit::{
    decode, encode, fit_gjr, fit_msgarch, ms_objective, ms_objective_value, FitConfig, GjrFit,
    MsGarchFit, StartSummary, REPARAM_DIM,
};
pub use simulate::{simulate_msgarch, Simulation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MsGarchError {
    #[error("parameter domain error: {0}")]
    Domain(String),
    #[error("non-finite return at index {0}")]
    NonFinite(usize),
    #[error("need at least {needed} observations, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("return series has zero variance")]
    ZeroVariance,
    #[error("invalid probability matrix: {0}")]
    Probabilities(String),
}

/// GJR-GARCH(1,1) dynamics and innovation shape of one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub nu: f64,
    pub xi: f64,
}

impl RegimeParams {
    pub fn persistence(&self) -> f64 {
        self.alpha + 0.5 * self.gamma + self.beta
    }

    /// `omega / (1 − alpha − gamma/2 − beta)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    pub fn validate(&self) -> Result<(), MsGarchError> {
        let all = [self.omega, self.alpha, self.gamma, self.beta, self.nu, self.xi];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(MsGarchError::Domain("non-finite regime parameter".into()));
        }
        if self.omega <= 0.0 {
            return Err(MsGarchError::Domain(format!("omega = {} must be positive", self.omega)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.alpha + self.gamma < 0.0 {
            return Err(MsGarchError::Domain(
                "need alpha >= 0, beta >= 0 and alpha + gamma >= 0".into(),
            ));
        }
        if self.beta >= 1.0 || self.persistence() >= 1.0 {
            return Err(MsGarchError::Domain(format!(
                "alpha + gamma/2 + beta = {} must be below 1",
                self.persistence()
            )));
        }
        density::check_shape(self.nu, self.xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsGarchParams {
    pub regimes: [RegimeParams; 2],
    pub p11: f64,
    pub p22: f64,
}

impl MsGarchParams {
    /// Stationary distribution of the regime chain.
    pub fn stationary(&self) -> [f64; 2] {
        let (q1, q2) = (1.0 - self.p11, 1.0 - self.p22);
        [q2 / (q1 + q2), q1 / (q1 + q2)]
    }

    /// Row-stochastic transition matrix, `P[i][j] = P(s_t = j | s_{t−1} = i)`.
    pub fn transition(&self) -> [[f64; 2]; 2] {
        [[self.p11, 1.0 - self.p11], [1.0 - self.p22, self.p22]]
    }

    /// Same model with the regime labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            regimes: [self.regimes[1], self.regimes[0]],
            p11: self.p22,
            p22: self.p11,
        }
    }

    /// Full validation, including `0 < p11, p22 < 1`.
    pub fn validate(&self) -> Result<(), MsGarchError> {
        for r in &self.regimes {
            r.validate()?;
        }
        for p in [self.p11, self.p22] {
            if !(p > 0.0 && p < 1.0) {
                return Err(MsGarchError::Domain(format!(
                    "transition probability {p} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Validation allowing absorbing regimes (`p = 1`), as long as a stationary
    /// distribution still exists.
    pub fn validate_closed(&self) -> Result<(), MsGarchError> {
        for r in &self.regimes {
            r.validate()?;
        }
        for p in [self.p11, self.p22] {
            if !(0.0..=1.0).contains(&p) {
                return Err(MsGarchError::Domain(format!(
                    "transition probability {p} must lie in [0, 1]"
                )));
            }
        }
        if self.p11 + self.p22 >= 2.0 {
            return Err(MsGarchError::Domain(
                "both regimes absorbing: no stationary distribution".into(),
            ));
        }
        Ok(())
    }
}
