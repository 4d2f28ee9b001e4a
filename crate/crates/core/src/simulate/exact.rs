//! Exact simulation of a stationary Gaussian sequence through the Cholesky
//! factor of its Toeplitz covariance matrix.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{RngSeed, SamplePath, SimGrid};
use crate::error::{Error, Result};
use crate::kernel::{GammaKernelParams, Kernel};
use crate::linalg::PackedCholesky;

/// Relative diagonal jitter applied once when the plain factorization fails.
const JITTER: f64 = 1e-12;

/// Reusable exact sampler. Building it factors the covariance matrix
/// (`O(N^3)`); every sample afterwards costs one triangular product.
#[derive(Debug, Clone)]
pub struct ExactGaussian {
    step: f64,
    factor: PackedCholesky,
    jittered: bool,
}

impl ExactGaussian {
    /// Gaussian core of the gamma-kernel process scaled by `sigma0`.
    pub fn new(params: &GammaKernelParams, sigma0: f64, grid: &SimGrid) -> Result<Self> {
        Self::from_kernel(params, sigma0, grid)
    }

    /// Any kernel with a closed-form autocovariance.
    pub fn from_kernel(kernel: &dyn Kernel, sigma0: f64, grid: &SimGrid) -> Result<Self> {
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        let step = grid.step();
        let scale = sigma0 * sigma0;
        let acvf = (0..=grid.n_obs)
            .map(|h| {
                kernel.unit_acvf(h as f64 * step).map(|g| scale * g).ok_or_else(|| {
                    Error::InvalidParameter("exact simulation needs a kernel with a closed-form autocovariance".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_autocovariance(step, &acvf)
    }

    /// Stationary sequence with autocovariance `acvf[h]` at lag `h` steps;
    /// the path has `acvf.len()` points.
    pub fn from_autocovariance(step: f64, acvf: &[f64]) -> Result<Self> {
        if acvf.len() < 2 {
            return Err(Error::Length("need at least two autocovariance lags".into()));
        }
        if !(acvf[0] > 0.0) || acvf.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "autocovariance must be finite with positive variance".into(),
            ));
        }
        let n = acvf.len();
        let entry = |i: usize, j: usize| acvf[i.abs_diff(j)];
        let (factor, jittered) = match PackedCholesky::factor(n, entry, 0.0) {
            Ok(f) => (f, false),
            Err(_) => (PackedCholesky::factor(n, entry, JITTER * acvf[0])?, true),
        };
        Ok(Self { step, factor, jittered })
    }

    pub fn len(&self) -> usize {
        self.factor.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.dim() == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Whether the diagonal jitter was needed to factor the matrix.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn factor(&self) -> &PackedCholesky {
        &self.factor
    }

    pub fn sample(&self, seed: RngSeed) -> Result<SamplePath> {
        self.sample_with_rng(&mut seed.rng())
    }

    pub fn sample_with_rng(&self, rng: &mut ChaCha8Rng) -> Result<SamplePath> {
        let z: Vec<f64> = (0..self.len()).map(|_| rng.sample(StandardNormal)).collect();
        SamplePath::new(self.step, self.factor.lower_mul(&z))
    }
}

/// One-shot exact simulation; see [`ExactGaussian`] to amortize the
/// factorization over many paths.
pub fn simulate_exact_gaussian(
    params: &GammaKernelParams,
    sigma0: f64,
    grid: &SimGrid,
    seed: RngSeed,
) -> Result<SamplePath> {
    ExactGaussian::new(params, sigma0, grid)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{acvf_gamma, ProcessMoments};

    #[test]
    fn two_point_ou_factor() {
        let p = GammaKernelParams::new(0.0, 1.0).unwrap();
        let grid = SimGrid::new(2, 1.0).unwrap();
        let sim = ExactGaussian::new(&p, 1.0, &grid).unwrap();
        let f = sim.factor();
        let d = grid.step();
        let sigma = |i: usize, j: usize| 0.5 * (-(i.abs_diff(j) as f64) * d).exp();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += f.get(i, k) * f.get(j, k);
                }
                assert!((s - sigma(i, j)).abs() < 1e-12, "({i},{j}) {s}");
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = GammaKernelParams::new(-0.2, 1.0).unwrap();
        let grid = SimGrid::new(40, 1.0).unwrap();
        let a = simulate_exact_gaussian(&p, 1.0, &grid, RngSeed::new(3, 9)).unwrap();
        let b = simulate_exact_gaussian(&p, 1.0, &grid, RngSeed::new(3, 9)).unwrap();
        let c = simulate_exact_gaussian(&p, 1.0, &grid, RngSeed::new(3, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.values().len(), 41);
    }

    #[test]
    fn sample_variance_matches_gamma0() {
        let p = GammaKernelParams::new(0.0, 0.5).unwrap();
        let grid = SimGrid::new(4, 1.0).unwrap();
        let sim = ExactGaussian::new(&p, 1.0, &grid).unwrap();
        let reps = 10_000;
        let mut rng = RngSeed::new(11, 0).rng();
        let mut draws = Vec::with_capacity(reps);
        for _ in 0..reps {
            draws.push(sim.sample_with_rng(&mut rng).unwrap().values()[2]);
        }
        let var = draws.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        let g0 = acvf_gamma(&p, &ProcessMoments::UNIT, 0.0).unwrap();
        let se = g0 * (2.0 / reps as f64).sqrt();
        assert!((var - g0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ExactGaussian::from_autocovariance(0.1, &[1.0]).is_err());
        assert!(ExactGaussian::from_autocovariance(0.1, &[0.0, 0.0]).is_err());
        // not positive definite even after jitter
        assert!(matches!(
            ExactGaussian::from_autocovariance(0.1, &[1.0, 1.5]),
            Err(Error::CholeskyFailure { .. })
        ));
    }
}
