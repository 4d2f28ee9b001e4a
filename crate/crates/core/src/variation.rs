//! Difference operators and power variations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::SamplePath;

/// Sum of `|d|^p` over a difference sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerVariation {
    pub p: f64,
    /// Difference frequency `v`; 0 marks first-order differences.
    pub frequency: usize,
    pub value: f64,
    pub count: usize,
}

/// Realized relative power variation on the grid `t = i delta`, `i = 1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrvPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// `|x|^p` with exact fast paths for the common integer powers.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x.abs()
    } else if p == 4.0 {
        let s = x * x;
        s * s
    } else {
        x.abs().powf(p)
    }
}

/// Grid index `floor(t / delta)`, tolerating rounding in `t`.
pub(crate) fn grid_index(path: &SamplePath, t: f64) -> Result<usize> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    let k = (t / path.step() + 1e-9).floor() as usize;
    if k > path.n_steps() {
        return Err(Error::Length(format!(
            "time {t} lies beyond the horizon {}",
            path.horizon()
        )));
    }
    Ok(k)
}

/// `X(i) - 2 X(i - v) + X(i - 2v)` for `i = 2v, ..., upto`.
pub(crate) fn second_diff_upto(x: &[f64], v: usize, upto: usize) -> impl Iterator<Item = f64> + '_ {
    (2 * v..=upto).map(move |i| x[i] - 2.0 * x[i - v] + x[i - 2 * v])
}

/// `sum_{i=2v}^{upto} |X(i) - 2 X(i-v) + X(i-2v)|^p` on raw values.
pub(crate) fn second_power_sum(x: &[f64], v: usize, p: f64, upto: usize) -> f64 {
    second_diff_upto(x, v, upto).map(|d| abs_pow(d, p)).sum()
}

/// Second-order differences at frequency `v`, for `i = 2v, ..., N`.
pub fn second_diff(path: &SamplePath, v: usize) -> Result<Vec<f64>> {
    check_frequency(path, v, path.n_steps())?;
    Ok(second_diff_upto(path.values(), v, path.n_steps()).collect())
}

fn check_frequency(path: &SamplePath, v: usize, upto: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter("frequency must be >= 1".into()));
    }
    if upto < 2 * v {
        return Err(Error::Length(format!(
            "frequency {v} needs at least {} points up to t, path has {}",
            2 * v + 1,
            upto.min(path.n_steps()) + 1
        )));
    }
    Ok(())
}

fn check_power(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("power must be positive, got {p}")));
    }
    Ok(())
}

/// `V_{v,t}^p = sum_{i=2v}^{floor(t/delta)} |X(i delta) - 2 X((i-v) delta) + X((i-2v) delta)|^p`.
pub fn power_variation(path: &SamplePath, v: usize, p: f64, t: f64) -> Result<PowerVariation> {
    check_power(p)?;
    let upto = grid_index(path, t)?;
    check_frequency(path, v, upto)?;
    Ok(PowerVariation {
        p,
        frequency: v,
        value: second_power_sum(path.values(), v, p, upto),
        count: upto + 1 - 2 * v,
    })
}

/// `V_t^p = sum_{i=1}^{floor(t/delta)} |X(i delta) - X((i-1) delta)|^p`.
pub fn first_order_variation(path: &SamplePath, p: f64, t: f64) -> Result<PowerVariation> {
    check_power(p)?;
    let upto = grid_index(path, t)?;
    if upto < 1 {
        return Err(Error::Length("first-order variation needs t >= delta".into()));
    }
    let x = path.values();
    let value = (1..=upto).map(|i| abs_pow(x[i] - x[i - 1], p)).sum();
    Ok(PowerVariation {
        p,
        frequency: 0,
        value,
        count: upto,
    })
}

/// Running sums `V_{i delta}^p`, `i = 1..=N`, of first-order differences.
pub(crate) fn cumulative_first_order(x: &[f64], p: f64) -> Vec<f64> {
    let mut acc = 0.0;
    x.windows(2)
        .map(|w| {
            acc += abs_pow(w[1] - w[0], p);
            acc
        })
        .collect()
}

/// `V_t^p / V_T^p` at every grid time; the last value is exactly 1.
pub fn rrv(path: &SamplePath, p: f64) -> Result<RrvPath> {
    check_power(p)?;
    let cum = cumulative_first_order(path.values(), p);
    let total = *cum.last().expect("paths have at least two points");
    if !(total > 0.0) {
        return Err(Error::Degenerate("constant path has zero power variation".into()));
    }
    let n = cum.len();
    let mut values: Vec<f64> = cum.iter().map(|v| v / total).collect();
    values[n - 1] = 1.0;
    let times = (1..=n).map(|i| path.time(i)).collect();
    Ok(RrvPath { times, values })
}
