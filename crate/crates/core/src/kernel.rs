//! Gamma kernel `g(x) = x^alpha e^{-lambda x}` and its second-order
//! structure.
//!
//! The autocovariance of the driftless process with this kernel is the
//! Matérn covariance: variance `kappa E[sigma^2] Gamma(2 alpha + 1)
//! (2 lambda)^{-(2 alpha + 1)}` and correlation
//! `2^{1/2 - alpha} / Gamma(alpha + 1/2) (lambda h)^{alpha + 1/2}
//! K_{alpha + 1/2}(lambda h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{bessel_k_scaled, ln_gamma};

/// A causal kernel function `x -> g(x)` on `x > 0`.
///
/// The simulators only need point evaluations; a closed-form autocovariance
/// is optional and enables the exact Gaussian simulator.
pub trait Kernel: Send + Sync {
    fn eval(&self, x: f64) -> Result<f64>;

    /// `int_0^inf g(x) g(x + h) dx`, if known in closed form.
    fn unit_acvf(&self, _h: f64) -> Option<f64> {
        None
    }
}

/// Parameters of the gamma kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaKernelParams {
    pub alpha: f64,
    pub lambda: f64,
}

impl GammaKernelParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > -0.5) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must exceed -1/2, got {alpha}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    /// Matérn smoothness `alpha + 1/2` (the Hurst index of the small-scale
    /// fractional behaviour).
    pub fn nu(&self) -> f64 {
        self.alpha + 0.5
    }
}

impl Kernel for GammaKernelParams {
    fn eval(&self, x: f64) -> Result<f64> {
        kernel_eval(self, x)
    }

    fn unit_acvf(&self, h: f64) -> Option<f64> {
        acvf_gamma(self, &ProcessMoments::UNIT, h).ok()
    }
}

/// Second moments of the driver and the volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessMoments {
    /// Var(L(1)).
    pub kappa: f64,
    /// E[sigma^2(0)].
    pub mean_sigma_sq: f64,
}

impl ProcessMoments {
    pub const UNIT: ProcessMoments = ProcessMoments {
        kappa: 1.0,
        mean_sigma_sq: 1.0,
    };

    pub fn new(kappa: f64, mean_sigma_sq: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !(mean_sigma_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "moments must be nonnegative, got kappa={kappa}, E[sigma^2]={mean_sigma_sq}"
            )));
        }
        Ok(Self { kappa, mean_sigma_sq })
    }

    pub fn scale(&self) -> f64 {
        self.kappa * self.mean_sigma_sq
    }
}

impl Default for ProcessMoments {
    fn default() -> Self {
        Self::UNIT
    }
}

/// Evaluates `x^alpha e^{-lambda x}` for `x >= 0`.
///
/// At the origin the kernel is 0 for `alpha > 0`, 1 for `alpha = 0`, and
/// singular for `alpha < 0`.
pub fn kernel_eval(params: &GammaKernelParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("kernel evaluated at x = {x} < 0")));
    }
    if x == 0.0 {
        return match params.alpha {
            a if a > 0.0 => Ok(0.0),
            0.0 => Ok(1.0),
            a => Err(Error::Singularity { alpha: a }),
        };
    }
    Ok((params.alpha * x.ln() - params.lambda * x).exp())
}

/// Variance `kappa E[sigma^2] Gamma(2 alpha + 1) (2 lambda)^{-(2 alpha + 1)}`.
pub fn variance_gamma(params: &GammaKernelParams, moments: &ProcessMoments) -> f64 {
    let a = 2.0 * params.alpha + 1.0;
    // a > 0 by the parameter invariant
    moments.scale() * (ln_gamma(a).unwrap_or(f64::NAN) - a * (2.0 * params.lambda).ln()).exp()
}

/// Autocovariance `gamma(h) = kappa E[sigma^2] int_0^inf g(x) g(x+h) dx`.
pub fn acvf_gamma(params: &GammaKernelParams, moments: &ProcessMoments, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("acvf lag must be >= 0, got {h}")));
    }
    Ok(variance_gamma(params, moments) * matern_rho(params, h)?)
}

/// Matérn correlation with smoothness `alpha + 1/2` and scale `1/lambda`.
///
/// `rho(0)` is the limit value 1.
pub fn matern_rho(params: &GammaKernelParams, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("correlation lag must be >= 0, got {h}")));
    }
    if h == 0.0 {
        return Ok(1.0);
    }
    let nu = params.nu();
    let x = params.lambda * h;
    if !x.is_finite() {
        return Ok(0.0);
    }
    let k_scaled = bessel_k_scaled(nu, x)?;
    // 2^{1-nu}/Gamma(nu) x^nu K_nu(x), evaluated in logs to survive large x
    let log_rho = (1.0 - nu) * 2f64.ln() - ln_gamma(nu)? + nu * x.ln() + k_scaled.ln() - x;
    Ok(log_rho.exp().min(1.0))
}

/// Increment scale of the Gaussian core,
/// `c(delta) = (2 gamma_0(0) - 2 gamma_0(delta))^{1/2}` with unit moments.
pub fn gaussian_core_scale(params: &GammaKernelParams, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let var = variance_gamma(params, &ProcessMoments::UNIT);
    let rho = matern_rho(params, delta)?;
    // 1 - rho is tiny for small delta; compute the variogram as 2 var (1 - rho)
    Ok((2.0 * var * (1.0 - rho)).max(0.0).sqrt())
}
