//! Path generation for Brownian and Lévy semistationary processes.
//!
//! Two schemes are provided:
//!
//! * [`ExactGaussian`]: draws the observation vector directly from its
//!   multivariate normal law through a Cholesky factor of the Toeplitz
//!   covariance. Only available for constant volatility and a Brownian
//!   driver, and free of discretization error.
//! * [`ConvolutionScheme`]: approximates the stochastic integral by a step
//!   function, evaluating the kernel at the right end of each cell and the
//!   volatility at the left end, truncated `M` steps into the past. The
//!   resulting discrete convolution is computed by FFT for long inputs.
//!
//! Every sampler is a pure function of its inputs and an [`RngSeed`].

mod convolution;
mod exact;
mod volatility;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convolution::{
    direct_convolution, simulate_convolution, BrownianIncrements, ConvolutionSample, ConvolutionScheme,
    IncrementSampler, DEFAULT_FFT_THRESHOLD,
};
pub use exact::{simulate_exact_gaussian, ExactGaussian};
pub use volatility::{simulate_volatility, VolatilityPath};

/// Default lower truncation depth in base-grid steps.
pub const DEFAULT_TRUNCATION: usize = 1000;

/// Equidistant simulation grid on `[0, horizon]` with `n_obs` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub n_obs: usize,
    pub horizon: f64,
    pub truncation: usize,
    pub subsample_factor: usize,
}

impl SimGrid {
    pub fn new(n_obs: usize, horizon: f64) -> Result<Self> {
        Self::with_options(n_obs, horizon, DEFAULT_TRUNCATION, 1)
    }

    pub fn with_options(n_obs: usize, horizon: f64, truncation: usize, subsample_factor: usize) -> Result<Self> {
        if n_obs < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_obs must be at least 2, got {n_obs}"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if truncation < 1 {
            return Err(Error::InvalidParameter("truncation must be >= 1".into()));
        }
        if subsample_factor < 1 {
            return Err(Error::InvalidParameter("subsample factor must be >= 1".into()));
        }
        Ok(Self {
            n_obs,
            horizon,
            truncation,
            subsample_factor,
        })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_obs as f64
    }

    pub fn with_truncation(mut self, truncation: usize) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::InvalidParameter("truncation must be >= 1".into()));
        }
        self.truncation = truncation;
        Ok(self)
    }

    pub fn with_subsample(mut self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("subsample factor must be >= 1".into()));
        }
        self.subsample_factor = k;
        Ok(self)
    }

    /// The grid the convolution scheme actually runs on: `k` times finer,
    /// with truncation `k M` so the physical truncation depth is unchanged.
    pub fn fine(&self) -> SimGrid {
        let k = self.subsample_factor;
        SimGrid {
            n_obs: self.n_obs * k,
            horizon: self.horizon,
            truncation: self.truncation * k,
            subsample_factor: 1,
        }
    }
}

/// Volatility model for the convolution scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolatilitySpec {
    /// `sigma(t) = sigma0`.
    Constant { sigma0: f64 },
    /// `log sigma(t) = int_{-inf}^t e^{-beta (t-s)} dB(s)`, with the
    /// per-step innovations of `B` correlated with the driver at
    /// `leverage_rho`.
    ExpOu { beta: f64, leverage_rho: f64 },
}

impl VolatilitySpec {
    pub fn constant(sigma0: f64) -> Result<Self> {
        let v = VolatilitySpec::Constant { sigma0 };
        v.validate()?;
        Ok(v)
    }

    pub fn exp_ou(beta: f64, leverage_rho: f64) -> Result<Self> {
        let v = VolatilitySpec::ExpOu { beta, leverage_rho };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            VolatilitySpec::Constant { sigma0 } if !(sigma0 > 0.0) || !sigma0.is_finite() => Err(
                Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")),
            ),
            VolatilitySpec::ExpOu { beta, .. } if !(beta > 0.0) || !beta.is_finite() => {
                Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")))
            }
            VolatilitySpec::ExpOu { leverage_rho, .. } if !(leverage_rho.abs() <= 1.0) => Err(Error::InvalidParameter(
                format!("leverage correlation must lie in [-1, 1], got {leverage_rho}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn leverage(&self) -> f64 {
        match *self {
            VolatilitySpec::Constant { .. } => 0.0,
            VolatilitySpec::ExpOu { leverage_rho, .. } => leverage_rho,
        }
    }

    /// Parses `constant:<sigma0>` or `expou:<beta>[:<rho>]`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |t: &str| -> Result<f64> {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{t}' in '{s}'")))
        };
        match parts.as_slice() {
            ["constant"] => Self::constant(1.0),
            ["constant", v] => Self::constant(num(v)?),
            ["expou", b] => Self::exp_ou(num(b)?, 0.0),
            ["expou", b, r] => Self::exp_ou(num(b)?, num(r)?),
            _ => Err(Error::InvalidParameter(format!(
                "volatility must be 'constant:<sigma0>' or 'expou:<beta>[:<rho>]', got '{s}'"
            ))),
        }
    }
}

/// Seed and stream of a deterministic random number generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }
}

/// Observations `X(i delta)`, `i = 0..=N`, on an equidistant grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    step: f64,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "path step must be positive, got {step}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::Length(format!(
                "a path needs at least 2 points, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at index {i}")));
        }
        Ok(Self { step, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of steps `N` (one less than the number of points).
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.n_steps() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// The first `n_steps + 1` points, keeping the step.
    pub fn prefix(&self, n_steps: usize) -> Result<SamplePath> {
        if n_steps + 1 > self.values.len() {
            return Err(Error::Length(format!(
                "prefix of {n_steps} steps requested from a path of {} steps",
                self.n_steps()
            )));
        }
        SamplePath::new(self.step, self.values[..=n_steps].to_vec())
    }

    /// Applies `x -> scale * x + shift + trend * t`.
    pub fn affine_transform(&self, scale: f64, shift: f64, trend: f64) -> Result<SamplePath> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| scale * x + shift + trend * self.time(i))
            .collect();
        SamplePath::new(self.step, values)
    }
}

/// Keeps every `k`-th observation, starting at index 0.
pub fn subsample(path: &SamplePath, k: usize) -> Result<SamplePath> {
    if k == 0 {
        return Err(Error::InvalidParameter("subsample factor must be >= 1".into()));
    }
    let n = path.n_steps();
    if !n.is_multiple_of(k) {
        return Err(Error::Length(format!("path of {n} steps cannot be subsampled by {k}")));
    }
    if k == 1 {
        return Ok(path.clone());
    }
    let values = path.values.iter().step_by(k).copied().collect();
    SamplePath::new(path.step * k as f64, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn ramp(n: usize) -> SamplePath {
        SamplePath::new(0.1, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn grid_step_times_n_is_horizon() {
        for &(n, t) in &[(3usize, 1.0), (500, 1.0), (1000, 1000.0), (7, 0.3)] {
            let g = SimGrid::new(n, t).unwrap();
            assert!((g.step() * n as f64 - t).abs() <= 1e-12 * t);
        }
        assert!(SimGrid::new(1, 1.0).is_err());
        assert!(SimGrid::with_options(10, 1.0, 0, 1).is_err());
        assert!(SimGrid::with_options(10, 1.0, 5, 0).is_err());
    }

    #[test]
    fn fine_grid_keeps_physical_depth() {
        let g = SimGrid::with_options(50, 1.0, 100, 4).unwrap();
        let f = g.fine();
        assert_eq!(f.n_obs, 200);
        assert_eq!(f.truncation, 400);
        assert!((f.step() * f.truncation as f64 - g.step() * g.truncation as f64).abs() < 1e-12);
    }

    #[test]
    fn subsample_examples() {
        let p = ramp(11);
        assert_eq!(subsample(&p, 1).unwrap(), p);
        let s = subsample(&p, 5).unwrap();
        assert_eq!(s.values(), &[0.0, 5.0, 10.0]);
        assert!((s.step() - 0.5).abs() < 1e-15);
        assert!(matches!(subsample(&p, 3), Err(Error::Length(_))));
        let big = ramp(50_001);
        assert_eq!(subsample(&big, 100).unwrap().values().len(), 501);
    }

    #[test]
    fn seeds_are_deterministic_and_streams_differ() {
        let a = RngSeed::new(7, 1).rng().next_u64();
        let b = RngSeed::new(7, 1).rng().next_u64();
        let c = RngSeed::new(7, 2).rng().next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn volatility_spec_parsing() {
        assert_eq!(
            VolatilitySpec::parse("constant:2").unwrap(),
            VolatilitySpec::Constant { sigma0: 2.0 }
        );
        assert_eq!(
            VolatilitySpec::parse("expou:5:-0.5").unwrap(),
            VolatilitySpec::ExpOu {
                beta: 5.0,
                leverage_rho: -0.5
            }
        );
        assert!(VolatilitySpec::parse("expou:5:1.5").is_err());
        assert!(VolatilitySpec::parse("constant:0").is_err());
        assert!(VolatilitySpec::parse("garch").is_err());
    }

    #[test]
    fn path_rejects_nonfinite() {
        assert!(SamplePath::new(0.1, vec![0.0, f64::NAN]).is_err());
        assert!(SamplePath::new(0.0, vec![0.0, 1.0]).is_err());
        assert!(SamplePath::new(0.1, vec![0.0]).is_err());
    }
}
