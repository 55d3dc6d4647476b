//! Simulation from the two-regime model, used to check the estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::density::{sample_skewed_t, SkewedT};
use super::filter::RegimeSpec;
use super::{MsGarchError, MsGarchParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub returns: Vec<f64>,
    /// Active regime per step, 0 or 1.
    pub regimes: Vec<usize>,
}

/// Draws `len` returns. The first regime is drawn from the stationary
/// distribution and both variance recursions start at their unconditional level.
pub fn simulate_msgarch(params: &MsGarchParams, len: usize, seed: u64) -> Result<Simulation, MsGarchError> {
    params.validate_closed()?;
    if len == 0 {
        return Err(MsGarchError::TooShort { needed: 1, found: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = [
        RegimeSpec::from_params(&params.regimes[0]),
        RegimeSpec::from_params(&params.regimes[1]),
    ];
    let dens: [SkewedT<f64>; 2] = [specs[0].density, specs[1].density];
    let trans = params.transition();
    let mut h = [
        params.regimes[0].unconditional_variance(),
        params.regimes[1].unconditional_variance(),
    ];
    let mut state = if rng.random::<f64>() < params.stationary()[0] { 0 } else { 1 };
    let mut returns = Vec::with_capacity(len);
    let mut regimes = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            state = if rng.random::<f64>() < trans[state][0] { 0 } else { 1 };
            let prev: f64 = returns[t - 1];
            for j in 0..2 {
                let p = &params.regimes[j];
                let shock = if prev < 0.0 { p.alpha + p.gamma } else { p.alpha };
                h[j] = p.omega + shock * prev * prev + p.beta * h[j];
            }
        }
        let p = &params.regimes[state];
        let z = sample_skewed_t(p.nu, p.xi, &dens[state], &mut rng);
        returns.push(h[state].sqrt() * z);
        regimes.push(state);
    }
    Ok(Simulation { returns, regimes })
}
