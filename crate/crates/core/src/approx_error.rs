//! Closed-form L² error of the truncated step-function scheme for the gamma
//! kernel.
//!
//! With `g~(x) = g(m delta)` on `((m-1) delta, m delta]`, `m <= i + M`, and
//! zero beyond, the error at `t = i delta` splits as
//! `E[(X(t) - X~(t))^2] = C1 + C2 + C3` with
//!
//! * `C1 = kappa E[sigma^2] int_0^inf g^2`,
//! * `C2 = kappa E[sigma^2] delta sum_{m=1}^{i+M} (m delta)^{2 alpha} e^{-2 lambda m delta}`,
//! * `C3 = -2 kappa E[sigma^2] sum_m g(m delta) int_{(m-1) delta}^{m delta} g`.
//!
//! The cross term is exact for a constant (more generally, martingale)
//! volatility; exp-OU volatility is not a martingale, so for it the sum is
//! only an approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{variance_gamma, GammaKernelParams, ProcessMoments};
use crate::simulate::SimGrid;
use crate::specfun::{incomplete_gamma_increment, lower_incomplete_gamma};

/// How the cross term `C3` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C3Form {
    /// `-2 kappa E[sigma^2] lambda^{-alpha-1} sum_m (m delta)^alpha e^{-lambda m delta}
    /// (gamma(alpha+1, lambda m delta) - gamma(alpha+1, lambda (m-1) delta))`.
    #[default]
    Exact,
    /// The frequently quoted variant with `(j delta)^{2 alpha} e^{-2 lambda j delta}`
    /// weights and limits shifted to `(j-2, j-1)`. It does not match the
    /// error of the scheme and is kept for comparison only.
    Printed,
}

/// The three error terms and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub mse: f64,
    pub rmse: f64,
}

impl ErrorBreakdown {
    fn new(c1: f64, c2: f64, c3: f64) -> Self {
        let mse = c1 + c2 + c3;
        Self {
            c1,
            c2,
            c3,
            mse,
            rmse: mse.max(0.0).sqrt(),
        }
    }
}

/// Error terms at `t = i delta` on `grid` (truncation `grid.truncation`).
pub fn error_terms(
    params: &GammaKernelParams,
    moments: &ProcessMoments,
    grid: &SimGrid,
    i: usize,
) -> Result<ErrorBreakdown> {
    error_terms_with(params, moments, grid, i, C3Form::Exact)
}

pub fn error_terms_with(
    params: &GammaKernelParams,
    moments: &ProcessMoments,
    grid: &SimGrid,
    i: usize,
    form: C3Form,
) -> Result<ErrorBreakdown> {
    if i > grid.n_obs {
        return Err(Error::InvalidParameter(format!(
            "evaluation index {i} beyond N = {}",
            grid.n_obs
        )));
    }
    let (alpha, lambda) = (params.alpha, params.lambda);
    let d = grid.step();
    let terms = i + grid.truncation;
    let scale = moments.scale();
    let a1 = alpha + 1.0;

    let c1 = variance_gamma(params, moments);

    let mut s2 = 0.0;
    let mut s3 = 0.0;
    for m in 1..=terms {
        let x = m as f64 * d;
        let lg = alpha * x.ln() - lambda * x;
        s2 += (2.0 * lg).exp();
        match form {
            C3Form::Exact => {
                let inc = incomplete_gamma_increment(a1, lambda * (x - d), lambda * x)?;
                s3 += lg.exp() * inc;
            }
            C3Form::Printed => {
                let hi = lower_incomplete_gamma(a1, lambda * (m as f64 - 1.0) * d)?;
                let lo = lower_incomplete_gamma(a1, lambda * (m as f64 - 2.0) * d)?;
                s3 += (2.0 * lg).exp() * (hi - lo);
            }
        }
    }
    let c2 = scale * d * s2;
    let c3 = -2.0 * scale * lambda.powf(-a1) * s3;
    Ok(ErrorBreakdown::new(c1, c2, c3))
}

/// One row of an error-versus-N curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurvePoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub mse: f64,
    pub rmse: f64,
}

/// Error at time `t` for each `N` in `n_list`, with step `delta = t / N`
/// and truncation `M = ceil(m_time / delta)` so the truncation depth stays
/// `m_time` time units.
pub fn error_curve(
    params: &GammaKernelParams,
    moments: &ProcessMoments,
    n_list: &[usize],
    t: f64,
    m_time: f64,
) -> Result<Vec<ErrorCurvePoint>> {
    error_curve_with(params, moments, n_list, t, m_time, C3Form::Exact)
}

/// As [`error_curve`] with a chosen form of the cross term.
pub fn error_curve_with(
    params: &GammaKernelParams,
    moments: &ProcessMoments,
    n_list: &[usize],
    t: f64,
    m_time: f64,
    form: C3Form,
) -> Result<Vec<ErrorCurvePoint>> {
    if !(m_time > 0.0) || !m_time.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "truncation depth must be positive, got {m_time}"
        )));
    }
    n_list
        .iter()
        .map(|&n| {
            let mut grid = SimGrid::new(n, t)?;
            let m = (m_time / grid.step() - 1e-9).ceil().max(1.0) as usize;
            grid = grid.with_truncation(m)?;
            let b = error_terms_with(params, moments, &grid, n, form)?;
            Ok(ErrorCurvePoint {
                n,
                alpha: params.alpha,
                lambda: params.lambda,
                c1: b.c1,
                c2: b.c2,
                c3: b.c3,
                mse: b.mse,
                rmse: b.rmse,
            })
        })
        .collect()
}
