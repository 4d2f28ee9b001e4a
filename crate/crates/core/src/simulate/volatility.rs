//! Exact simulation of the exponential Ornstein-Uhlenbeck volatility.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{RngSeed, SimGrid, VolatilitySpec};
use crate::error::Result;

/// Volatility on the extended grid `t = j delta`, `j = -M, ..., N-1`.
///
/// `innovations[q]` is the standard normal that moves `log sigma` from
/// index `q` to `q + 1`; the last one leads past the grid and is kept so
/// every driver increment has a partner for the leverage coupling.
/// Constant volatility has no innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityPath {
    pub sigma: Vec<f64>,
    pub innovations: Vec<f64>,
}

/// Draws `sigma` at `len` consecutive grid points spaced `step` apart.
///
/// Under the exp-OU model `log sigma` starts from its stationary law
/// `N(0, 1/(2 beta))` and follows the exact AR(1) recursion
/// `log sigma(t + d) = e^{-beta d} log sigma(t) + sqrt((1 - e^{-2 beta d}) / (2 beta)) Z`.
pub(crate) fn sample_volatility(spec: &VolatilitySpec, len: usize, step: f64, rng: &mut ChaCha8Rng) -> VolatilityPath {
    match *spec {
        VolatilitySpec::Constant { sigma0 } => VolatilityPath {
            sigma: vec![sigma0; len],
            innovations: Vec::new(),
        },
        VolatilitySpec::ExpOu { beta, .. } => {
            let a = (-beta * step).exp();
            // 1 - e^{-2 beta d} without cancellation for small beta d
            let s = (-(-2.0 * beta * step).exp_m1() / (2.0 * beta)).sqrt();
            let z0: f64 = rng.sample(StandardNormal);
            let mut log_sigma = z0 / (2.0 * beta).sqrt();
            let mut sigma = Vec::with_capacity(len);
            let mut innovations = Vec::with_capacity(len);
            for _ in 0..len {
                sigma.push(log_sigma.exp());
                let z: f64 = rng.sample(StandardNormal);
                innovations.push(z);
                log_sigma = a * log_sigma + s * z;
            }
            VolatilityPath { sigma, innovations }
        }
    }
}

/// Volatility needed by the convolution scheme on `grid`: values at
/// `j = -M, ..., N-1` on the grid's own step (the caller passes the fine
/// grid when subsampling).
pub fn simulate_volatility(spec: &VolatilitySpec, grid: &SimGrid, seed: RngSeed) -> Result<VolatilityPath> {
    spec.validate()?;
    let len = grid.n_obs + grid.truncation;
    Ok(sample_volatility(spec, len, grid.step(), &mut seed.rng()))
}
