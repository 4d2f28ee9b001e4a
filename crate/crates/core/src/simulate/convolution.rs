//! Step-function approximation of the moving-average integral, evaluated
//! as a discrete convolution.
//!
//! On a grid with step `d` the scheme is
//! `X(i d) = sum_{m=1}^{i+M} g(m d) sigma((i-m) d) dL_{i-m+1}`,
//! where `dL_j = L(j d) - L((j-1) d)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::volatility::{sample_volatility, VolatilityPath};
use super::{subsample, RngSeed, SamplePath, SimGrid, VolatilitySpec};
use crate::error::{Error, Result};
use crate::kernel::{GammaKernelParams, Kernel};

/// Input length above which the convolution runs through the FFT.
pub const DEFAULT_FFT_THRESHOLD: usize = 4096;

/// Source of i.i.d. driver increments over cells of length `step`.
pub trait IncrementSampler: Send + Sync {
    fn fill(&self, rng: &mut ChaCha8Rng, step: f64, out: &mut [f64]);
}

/// Standard Brownian motion: `dL ~ N(0, step)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrownianIncrements;

impl IncrementSampler for BrownianIncrements {
    fn fill(&self, rng: &mut ChaCha8Rng, step: f64, out: &mut [f64]) {
        let s = step.sqrt();
        for v in out {
            let z: f64 = rng.sample(StandardNormal);
            *v = s * z;
        }
    }
}

/// `y[i] = sum_{l=0}^{i+m-1} g[l] s[i+m-1-l]` for `i = 0..=n`, where
/// `g.len() == s.len() == n + m`.
pub fn direct_convolution(g: &[f64], s: &[f64], n: usize, m: usize) -> Vec<f64> {
    assert_eq!(g.len(), n + m);
    assert_eq!(s.len(), n + m);
    (0..=n)
        .map(|i| {
            let top = i + m - 1;
            let mut acc = 0.0;
            for l in 0..=top {
                acc += g[l] * s[top - l];
            }
            acc
        })
        .collect()
}

struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_spectrum: Vec<Complex<f64>>,
}

impl fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftPlan").field("size", &self.size).finish()
    }
}

impl FftPlan {
    fn new(weights: &[f64], m: usize) -> Self {
        let len = weights.len();
        // outputs live at indices m-1..len; circular wrap-around lands
        // below m-1 as long as size >= 2 len - m
        let size = (2 * len - m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_spectrum = vec![Complex::new(0.0, 0.0); size];
        for (c, &w) in kernel_spectrum.iter_mut().zip(weights) {
            c.re = w;
        }
        forward.process(&mut kernel_spectrum);
        let scale = 1.0 / size as f64;
        for c in &mut kernel_spectrum {
            *c *= scale;
        }
        Self {
            size,
            forward,
            inverse,
            kernel_spectrum,
        }
    }

    fn convolve(&self, s: &[f64], n: usize, m: usize) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (c, &v) in buf.iter_mut().zip(s) {
            c.re = v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        buf[m - 1..m + n].iter().map(|c| c.re).collect()
    }
}

/// All random ingredients of one convolution-scheme draw on the fine grid.
#[derive(Debug, Clone)]
pub struct ConvolutionSample {
    /// The subsampled path on the requested grid.
    pub path: SamplePath,
    /// Volatility at fine indices `-kM, ..., kN-1`.
    pub volatility: VolatilityPath,
    /// Driver increments `dL_j`, fine indices `j = -kM+1, ..., kN`.
    pub increments: Vec<f64>,
}

/// Convolution scheme with precomputed kernel weights (and kernel spectrum
/// when the FFT path is used).
#[derive(Debug)]
pub struct ConvolutionScheme {
    grid: SimGrid,
    fine: SimGrid,
    vol: VolatilitySpec,
    weights: Vec<f64>,
    fft: Option<FftPlan>,
}

impl ConvolutionScheme {
    pub fn new(kernel: &dyn Kernel, vol: VolatilitySpec, grid: SimGrid) -> Result<Self> {
        Self::with_threshold(kernel, vol, grid, DEFAULT_FFT_THRESHOLD)
    }

    /// Uses the FFT when `N + M` on the fine grid exceeds `fft_threshold`.
    pub fn with_threshold(
        kernel: &dyn Kernel,
        vol: VolatilitySpec,
        grid: SimGrid,
        fft_threshold: usize,
    ) -> Result<Self> {
        vol.validate()?;
        let fine = grid.fine();
        let (n, m) = (fine.n_obs, fine.truncation);
        let d = fine.step();
        let weights = (1..=n + m)
            .map(|l| kernel.eval(l as f64 * d))
            .collect::<Result<Vec<_>>>()?;
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Domain(format!("kernel weight {i} is not finite")));
        }
        let fft = (n + m > fft_threshold).then(|| FftPlan::new(&weights, m));
        Ok(Self {
            grid,
            fine,
            vol,
            weights,
            fft,
        })
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    /// Kernel weights `g(l d)`, `l = 1..=N+M`, on the fine grid.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, seed: RngSeed) -> Result<SamplePath> {
        Ok(self.sample_detailed(seed)?.path)
    }

    /// Brownian driver, with the leverage coupling of the volatility spec.
    pub fn sample_detailed(&self, seed: RngSeed) -> Result<ConvolutionSample> {
        let mut rng = seed.rng();
        let len = self.weights.len();
        let d = self.fine.step();
        let volatility = sample_volatility(&self.vol, len, d, &mut rng);
        let rho = self.vol.leverage();
        let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
        let sd = d.sqrt();
        let increments: Vec<f64> = (0..len)
            .map(|q| {
                let z: f64 = rng.sample(StandardNormal);
                let zl = if rho != 0.0 {
                    rho * volatility.innovations[q] + rho_c * z
                } else {
                    z
                };
                sd * zl
            })
            .collect();
        let path = self.assemble(&volatility.sigma, &increments)?;
        Ok(ConvolutionSample {
            path,
            volatility,
            increments,
        })
    }

    /// Custom driver; leverage is only defined for the Brownian driver.
    pub fn sample_with_driver(&self, seed: RngSeed, driver: &dyn IncrementSampler) -> Result<SamplePath> {
        if self.vol.leverage() != 0.0 {
            return Err(Error::InvalidParameter("leverage requires the Brownian driver".into()));
        }
        let mut rng = seed.rng();
        let len = self.weights.len();
        let d = self.fine.step();
        let volatility = sample_volatility(&self.vol, len, d, &mut rng);
        let mut increments = vec![0.0; len];
        driver.fill(&mut rng, d, &mut increments);
        self.assemble(&volatility.sigma, &increments)
    }

    /// Convolves kernel weights with `sigma((j-1) d) dL_j` and subsamples.
    pub fn assemble(&self, sigma: &[f64], increments: &[f64]) -> Result<SamplePath> {
        let len = self.weights.len();
        if sigma.len() != len || increments.len() != len {
            return Err(Error::Length(format!(
                "expected {len} volatility values and increments, got {} and {}",
                sigma.len(),
                increments.len()
            )));
        }
        let s: Vec<f64> = sigma.iter().zip(increments).map(|(a, b)| a * b).collect();
        let (n, m) = (self.fine.n_obs, self.fine.truncation);
        let values = match &self.fft {
            Some(plan) => plan.convolve(&s, n, m),
            None => direct_convolution(&self.weights, &s, n, m),
        };
        let fine_path = SamplePath::new(self.fine.step(), values)?;
        subsample(&fine_path, self.grid.subsample_factor)
    }
}

/// One-shot convolution simulation with the gamma kernel and a Brownian
/// driver.
pub fn simulate_convolution(
    params: &GammaKernelParams,
    vol: VolatilitySpec,
    grid: SimGrid,
    seed: RngSeed,
) -> Result<SamplePath> {
    ConvolutionScheme::new(params, vol, grid)?.sample(seed)
}
