//! Relative realized power variation: pointwise confidence intervals and
//! tests of constant volatility against a Brownian-bridge limit.
//!
//! Under constant volatility `RRV_t -> t / T`, and
//! `delta^{-1/2} (RRV_t - t/T)` converges to `c B(t/T) sqrt(T)` for a
//! standard bridge `B` with `c = sqrt(lambda_p) / (m_p T)`.

mod bridge;

pub use bridge::{
    bridge_critical_values, bridge_quantiles_cached, bridge_quantiles_mc, cvm_sf, kolmogorov_sf, read_critval_csv,
    unit_quantile_closed_form, write_critval_csv, BridgeMcConfig, CritvalMethod, CritvalRow, Metric, STANDARD_LEVELS,
    SUP_DISCRETE_CORRECTION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{cof_estimate, lambda2_scalar};
use crate::simulate::SamplePath;
use crate::specfun::{normal_abs_moment, normal_quantile};
use crate::variation::{cumulative_first_order, grid_index};

/// Environment variable naming a directory for cached Monte Carlo bridge
/// quantiles.
pub const CRITVAL_CACHE_ENV: &str = "LSS_CRITVAL_CACHE";

fn require_p2(p: f64) -> Result<()> {
    if p != 2.0 {
        return Err(Error::InvalidParameter(format!(
            "the variance factor lambda_p is only available for p = 2, got p = {p}"
        )));
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Pieces shared by the interval and the tests.
struct RrvContext {
    delta: f64,
    horizon: f64,
    alpha_hat: f64,
    lambda_p: f64,
    m_p: f64,
    /// `V_{i delta}^p`, `i = 1..=N`.
    cum_p: Vec<f64>,
}

impl RrvContext {
    fn new(path: &SamplePath, p: f64) -> Result<Self> {
        require_p2(p)?;
        let est = cof_estimate(path, 2.0)?;
        let lambda_p = lambda2_scalar(est.alpha_hat)?;
        let cum_p = cumulative_first_order(path.values(), p);
        if !(*cum_p.last().expect("non-empty path") > 0.0) {
            return Err(Error::Degenerate("constant path has zero power variation".into()));
        }
        Ok(Self {
            delta: path.step(),
            horizon: path.horizon(),
            alpha_hat: est.alpha_hat,
            lambda_p,
            m_p: normal_abs_moment(p),
            cum_p,
        })
    }

    fn total(&self) -> f64 {
        *self.cum_p.last().expect("non-empty path")
    }

    fn rrv_at(&self, i: usize) -> f64 {
        if i == self.cum_p.len() {
            1.0
        } else {
            self.cum_p[i - 1] / self.total()
        }
    }

    fn bridge_scale(&self) -> f64 {
        self.lambda_p.sqrt() / (self.m_p * self.horizon) * self.horizon.sqrt()
    }
}

/// Pointwise asymptotic confidence interval for the relative realized
/// variation at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrvCi {
    pub t: f64,
    pub rrv: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Asymptotic variance `v_t` of `delta^{-1/2} (RRV_t - limit)`.
    pub variance: f64,
    pub alpha_hat_used: f64,
    pub lambda_p_used: f64,
}

/// `v_t = lambda_p / (delta m_{2p} V_T^2) ((1 - RRV_t)^2 V_t^{2p} + RRV_t^2 (V_T^{2p} - V_t^{2p}))`.
pub fn rrv_variance(path: &SamplePath, p: f64, t: f64, lambda_p: f64) -> Result<f64> {
    require_p2(p)?;
    let i = grid_index(path, t)?;
    if i < 1 {
        return Err(Error::Length("RRV needs t >= delta".into()));
    }
    let cum_p = cumulative_first_order(path.values(), p);
    let cum_2p = cumulative_first_order(path.values(), 2.0 * p);
    let vt = *cum_p.last().expect("non-empty path");
    if !(vt > 0.0) {
        return Err(Error::Degenerate("constant path has zero power variation".into()));
    }
    let r = cum_p[i - 1] / vt;
    let q_t = cum_2p[i - 1];
    let q_total = *cum_2p.last().expect("non-empty path");
    let m_2p = normal_abs_moment(2.0 * p);
    Ok(lambda_p / (path.step() * m_2p * vt * vt) * ((1.0 - r).powi(2) * q_t + r * r * (q_total - q_t)))
}

/// Two-sided interval `RRV_t +- z sqrt(delta v_t)`, clipped to `[0, 1]`;
/// `level` is the significance level, so 0.05 gives a 95% interval.
pub fn rrv_confidence(path: &SamplePath, p: f64, t: f64, level: f64) -> Result<RrvCi> {
    check_level(level)?;
    let ctx = RrvContext::new(path, p)?;
    let i = grid_index(path, t)?;
    if i < 1 {
        return Err(Error::Length("RRV needs t >= delta".into()));
    }
    let variance = rrv_variance(path, p, t, ctx.lambda_p)?;
    let rrv = ctx.rrv_at(i);
    let half = normal_quantile(1.0 - 0.5 * level)? * (ctx.delta * variance).sqrt();
    Ok(RrvCi {
        t,
        rrv,
        lower: (rrv - half).max(0.0),
        upper: (rrv + half).min(1.0),
        level,
        variance,
        alpha_hat_used: ctx.alpha_hat,
        lambda_p_used: ctx.lambda_p,
    })
}

/// Critical value and decision at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub level: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// Test of constant volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolTestResult {
    pub metric: Metric,
    pub statistic: f64,
    pub decisions: Vec<LevelDecision>,
    /// Scale `c sqrt(T)` of the limiting bridge.
    pub bridge_scale: f64,
    pub lambda_p_used: f64,
    pub alpha_hat_used: f64,
}

impl VolTestResult {
    pub fn reject_at(&self, level: f64) -> Option<bool> {
        self.decisions
            .iter()
            .find(|d| (d.level - level).abs() < 1e-12)
            .map(|d| d.reject)
    }
}

/// The distance of `Z_i = delta^{-1/2} (RRV_{i delta} - i delta / T)`,
/// `i = 1..N-1`, from zero: `delta sum |Z|`, `delta sum Z^2` or `max |Z|`.
fn statistic(ctx: &RrvContext, metric: Metric) -> f64 {
    let n = ctx.cum_p.len();
    let sd = ctx.delta.sqrt();
    let z = (1..n).map(|i| (ctx.rrv_at(i) - i as f64 / n as f64) / sd);
    match metric {
        Metric::L1 => ctx.delta * z.map(f64::abs).sum::<f64>(),
        Metric::L2 => ctx.delta * z.map(|v| v * v).sum::<f64>(),
        Metric::Sup => z.fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Critical values of the statistic: `sup` scales with the bridge scale
/// `s`, the integrals additionally with the horizon `T` (and `L2` with
/// `s^2`).
fn critical_values(ctx: &RrvContext, metric: Metric, levels: &[f64], method: &CritvalMethod) -> Result<Vec<f64>> {
    let s = ctx.bridge_scale();
    let cv = bridge_critical_values(metric, s, levels, method)?;
    let time_factor = match metric {
        Metric::Sup => 1.0,
        Metric::L1 | Metric::L2 => ctx.horizon,
    };
    Ok(cv.into_iter().map(|q| q * time_factor).collect())
}

/// Tests constant volatility with the given metric at each level.
pub fn vol_test(path: &SamplePath, p: f64, metric: Metric, levels: &[f64]) -> Result<VolTestResult> {
    vol_test_with(path, p, metric, levels, &CritvalMethod::ClosedForm)
}

pub fn vol_test_with(
    path: &SamplePath,
    p: f64,
    metric: Metric,
    levels: &[f64],
    method: &CritvalMethod,
) -> Result<VolTestResult> {
    Ok(vol_test_all(path, p, &[metric], levels, method)?.remove(0))
}

/// Runs several metrics on one path, sharing the estimate of `alpha`.
pub fn vol_test_all(
    path: &SamplePath,
    p: f64,
    metrics: &[Metric],
    levels: &[f64],
    method: &CritvalMethod,
) -> Result<Vec<VolTestResult>> {
    for &l in levels {
        check_level(l)?;
    }
    let ctx = RrvContext::new(path, p)?;
    metrics
        .iter()
        .map(|&metric| {
            let stat = statistic(&ctx, metric);
            let cvs = critical_values(&ctx, metric, levels, method)?;
            Ok(VolTestResult {
                metric,
                statistic: stat,
                decisions: levels
                    .iter()
                    .zip(cvs)
                    .map(|(&level, critical_value)| LevelDecision {
                        level,
                        critical_value,
                        reject: stat > critical_value,
                    })
                    .collect(),
                bridge_scale: ctx.bridge_scale(),
                lambda_p_used: ctx.lambda_p,
                alpha_hat_used: ctx.alpha_hat,
            })
        })
        .collect()
}
