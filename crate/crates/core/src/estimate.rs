//! Change-of-frequency estimator of the smoothness parameter and its
//! central limit theorem.
//!
//! The estimator compares second-order power variations at frequencies 1
//! and 2: `COF = V_2^p / V_1^p -> 2^{(2 alpha + 1) p / 2}`, hence
//! `alpha_hat = log2(COF) / p - 1/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::SamplePath;
use crate::specfun::{hurwitz_zeta, normal_abs_moment, normal_quantile};
use crate::variation::second_power_sum;

/// Upper end of the smoothness range where the asymptotic variance is
/// finite.
pub const CLT_ALPHA_MAX: f64 = 0.25;

/// Beyond this lag the correlation functions are evaluated from their
/// asymptotic series instead of the differenced powers, which cancel
/// catastrophically.
const FGN_SERIES_FROM: i64 = 50;
const DIAMOND_SERIES_FROM: i64 = 20;
const SERIES_TERMS: usize = 10;

/// Default truncation of the fractional-noise series (a tail correction
/// is added analytically).
pub const DEFAULT_LAMBDA2_TERMS: usize = 1000;
const MATRIX_TAIL_TOL: f64 = 1e-12;
const MAX_TERMS: usize = 10_000_000;

fn check_alpha_open(alpha: f64, hi: f64) -> Result<()> {
    if !(alpha > -0.5 && alpha < hi) {
        return Err(Error::Domain(format!("alpha must lie in (-1/2, {hi}), got {alpha}")));
    }
    Ok(())
}

/// Generalized binomial coefficient `C(a, n)`.
fn binom(a: f64, n: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..n {
        c *= (a - k as f64) / (k + 1) as f64;
    }
    c
}

/// `C(a, 2k)` for `k = 1..=SERIES_TERMS`.
fn even_binomials(a: f64) -> Vec<f64> {
    (1..=SERIES_TERMS).map(|k| binom(a, 2 * k)).collect()
}

/// Correlation of fractional Gaussian noise with Hurst index `alpha + 1/2`:
/// `rho(j) = (|j+1|^{2 alpha + 1} - 2 |j|^{2 alpha + 1} + |j-1|^{2 alpha + 1}) / 2`.
pub fn fgn_rho(alpha: f64, j: i64) -> f64 {
    let a = 2.0 * alpha + 1.0;
    let j = j.abs();
    if j == 0 {
        return 1.0;
    }
    let jf = j as f64;
    if j < FGN_SERIES_FROM {
        return 0.5 * ((jf + 1.0).powf(a) - 2.0 * jf.powf(a) + (jf - 1.0).powf(a));
    }
    // sum_k C(a, 2k) j^{a - 2k}
    let inv2 = 1.0 / (jf * jf);
    let mut pow = jf.powf(a) * inv2;
    let mut s = 0.0;
    for k in 1..=SERIES_TERMS {
        s += binom(a, 2 * k) * pow;
        pow *= inv2;
    }
    s
}

/// Correlation of second-order differences of fractional Brownian motion
/// with Hurst index `alpha + 1/2`; even in `j`.
pub fn second_diff_rho(alpha: f64, j: i64) -> f64 {
    let a = 2.0 * alpha + 1.0;
    let j = j.abs();
    let norm = 0.5 / (4.0 - 2f64.powf(a));
    let jf = j as f64;
    if j < DIAMOND_SERIES_FROM {
        let t = |x: f64| x.abs().powf(a);
        return norm * (-t(jf - 2.0) + 4.0 * t(jf - 1.0) - 6.0 * t(jf) + 4.0 * t(jf + 1.0) - t(jf + 2.0));
    }
    // the bracket is minus the fourth central difference of j^a, which
    // expands as sum_{k>=2} C(a, 2k) (2^{2k+1} - 8) j^{a-2k}
    let inv2 = 1.0 / (jf * jf);
    let mut pow = jf.powf(a) * inv2 * inv2;
    let mut s = 0.0;
    for k in 2..=SERIES_TERMS {
        s += binom(a, 2 * k) * (2f64.powi(2 * k as i32 + 1) - 8.0) * pow;
        pow *= inv2;
    }
    -norm * s
}

/// `lambda_2(alpha) = 2 + 2 sum_{j>=1} rho_alpha(j)^2`, the asymptotic
/// variance factor of normalized quadratic variation.
///
/// The series diverges for `alpha >= 1/4`, which is reported as a domain
/// error.
pub fn lambda2_scalar(alpha: f64) -> Result<f64> {
    lambda2_scalar_with_terms(alpha, DEFAULT_LAMBDA2_TERMS)
}

/// As [`lambda2_scalar`], summing `terms` terms explicitly and the rest
/// through the asymptotic expansion of `rho_alpha(j)^2`.
pub fn lambda2_scalar_with_terms(alpha: f64, terms: usize) -> Result<f64> {
    check_alpha_open(alpha, CLT_ALPHA_MAX)?;
    let terms = terms.clamp(FGN_SERIES_FROM as usize, MAX_TERMS);
    let mut s = 0.0;
    for j in 1..=terms as i64 {
        let r = fgn_rho(alpha, j);
        s += r * r;
    }
    // sum_{j > J} (sum_k c_k j^{a-2k})^2 = sum_{k,l} c_k c_l zeta(2k + 2l - 2a, J + 1)
    let a = 2.0 * alpha + 1.0;
    let c = even_binomials(a);
    let q = terms as f64 + 1.0;
    let mut tail = 0.0;
    for (k, ck) in c.iter().enumerate() {
        for (l, cl) in c.iter().enumerate() {
            let expo = 2.0 * (k + l + 2) as f64 - 2.0 * a;
            tail += ck * cl * hurwitz_zeta(expo, q)?;
        }
    }
    Ok(2.0 + 2.0 * (s + tail))
}

/// Entries of the symmetric 2x2 asymptotic covariance matrix of the
/// normalized frequency-1 and frequency-2 quadratic variations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda2Matrix {
    pub l11: f64,
    pub l12: f64,
    pub l22: f64,
}

impl Lambda2Matrix {
    /// `e^T Lambda e` with `e = (-1, 1)`.
    pub fn contrast_variance(&self) -> f64 {
        self.l11 - 2.0 * self.l12 + self.l22
    }

    pub fn determinant(&self) -> f64 {
        self.l11 * self.l22 - self.l12 * self.l12
    }
}

/// The matrix for `p = 2`, valid for `alpha` in `(-1/2, 1/4)`. The number
/// of terms grows until an integral bound on the remaining tail drops
/// below `1e-12`.
pub fn lambda2_matrix(alpha: f64) -> Result<Lambda2Matrix> {
    check_alpha_open(alpha, CLT_ALPHA_MAX)?;
    // squared terms decay like j^{-s} with s = 6 - 4 alpha
    let s = 6.0 - 4.0 * alpha;
    let mut terms = 256usize;
    loop {
        let r = second_diff_rho(alpha, terms as i64);
        let bound = 4.0 * 16.0 * r * r * terms as f64 / (s - 1.0);
        if bound < MATRIX_TAIL_TOL || terms >= MAX_TERMS {
            return lambda2_matrix_with_terms(alpha, terms);
        }
        terms *= 2;
    }
}

/// The matrix with every series truncated after `terms` terms.
pub fn lambda2_matrix_with_terms(alpha: f64, terms: usize) -> Result<Lambda2Matrix> {
    check_alpha_open(alpha, CLT_ALPHA_MAX)?;
    if terms < 1 {
        return Err(Error::InvalidParameter("need at least one term".into()));
    }
    let r: Vec<f64> = (0..=terms as i64 + 2).map(|j| second_diff_rho(alpha, j)).collect();
    let rr = |j: i64| r[j.unsigned_abs() as usize];
    let mut s11 = 0.0;
    let mut s12 = 0.0;
    let mut s22 = 0.0;
    for j in 1..=terms as i64 {
        s11 += rr(j) * rr(j);
        let c22 = rr(j - 2) + 4.0 * rr(j - 1) + 6.0 * rr(j) + 4.0 * rr(j + 1) + rr(j + 2);
        s22 += c22 * c22;
    }
    for j in 0..terms as i64 {
        let c12 = rr(j) + 2.0 * rr(j + 1) + rr(j + 2);
        s12 += c12 * c12;
    }
    let l11 = 2.0 + 4.0 * s11;
    let l12 = 2f64.powf(2.0 - 2.0 * alpha) * (rr(1) + 1.0).powi(2) + 2f64.powf(1.0 - 2.0 * alpha) * s12;
    let l22 = 2.0 + 2f64.powf(-4.0 * alpha) * s22;
    Ok(Lambda2Matrix { l11, l12, l22 })
}

/// Result of the change-of-frequency estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CofEstimate {
    pub alpha_hat: f64,
    pub p: f64,
    pub cof_value: f64,
    /// Number of increments `N` of the path.
    pub n_used: usize,
    /// Asymptotic standard error of `alpha_hat`; only available for
    /// `p = 2` and `alpha_hat` inside `(-1/2, 1/4)`.
    pub stderr: Option<f64>,
    /// `V_{2,T}^p`, frequency-2 variation with power `p`.
    pub v2_p: f64,
    /// `V_{2,T}^{2p}`.
    pub v2_2p: f64,
}

impl CofEstimate {
    /// `(alpha_hat - alpha0) / stderr`.
    pub fn z_stat_vs(&self, alpha0: f64) -> Result<f64> {
        let se = self.stderr.ok_or_else(|| self.no_stderr_reason())?;
        Ok((self.alpha_hat - alpha0) / se)
    }

    fn no_stderr_reason(&self) -> Error {
        if self.p != 2.0 {
            Error::InvalidParameter(format!(
                "the asymptotic variance is only available for p = 2, got p = {}",
                self.p
            ))
        } else {
            Error::Domain(format!(
                "alpha_hat = {} lies outside (-1/2, 1/4) where the central limit theorem holds",
                self.alpha_hat
            ))
        }
    }
}

/// Estimates `alpha` from the whole path.
pub fn cof_estimate(path: &SamplePath, p: f64) -> Result<CofEstimate> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("power must be positive, got {p}")));
    }
    let n = path.n_steps();
    if n < 4 {
        return Err(Error::Length(format!(
            "the estimator needs at least 5 observations, got {}",
            n + 1
        )));
    }
    let x = path.values();
    let v1 = second_power_sum(x, 1, p, n);
    let v2 = second_power_sum(x, 2, p, n);
    if !(v1 > 0.0) || !(v2 > 0.0) {
        return Err(Error::Degenerate(
            "second-order differences vanish (affine path)".into(),
        ));
    }
    let v2_2p = second_power_sum(x, 2, 2.0 * p, n);
    let cof_value = v2 / v1;
    let alpha_hat = cof_value.log2() / p - 0.5;
    let stderr = if p == 2.0 && alpha_hat > -0.5 && alpha_hat < CLT_ALPHA_MAX {
        let lam = lambda2_matrix(alpha_hat)?;
        let num = (v2_2p * lam.contrast_variance() / normal_abs_moment(2.0 * p)).sqrt();
        Some(num / (v2 * std::f64::consts::LN_2 * p))
    } else {
        None
    };
    Ok(CofEstimate {
        alpha_hat,
        p,
        cof_value,
        n_used: n,
        stderr,
        v2_p: v2,
        v2_2p,
    })
}

/// Two-sided test of `H0: alpha = alpha0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaTest {
    pub alpha_hat: f64,
    pub stderr: f64,
    pub cof_value: f64,
    pub p: f64,
    pub n_used: usize,
    pub alpha0: f64,
    pub z: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub level: f64,
}

pub fn test_alpha(path: &SamplePath, p: f64, alpha0: f64, level: f64) -> Result<AlphaTest> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let est = cof_estimate(path, p)?;
    test_alpha_from(&est, alpha0, level)
}

/// The test from an already computed estimate.
pub fn test_alpha_from(est: &CofEstimate, alpha0: f64, level: f64) -> Result<AlphaTest> {
    let z = est.z_stat_vs(alpha0)?;
    let critical_value = normal_quantile(1.0 - 0.5 * level)?;
    Ok(AlphaTest {
        alpha_hat: est.alpha_hat,
        stderr: est.stderr.unwrap_or(f64::NAN),
        cof_value: est.cof_value,
        p: est.p,
        n_used: est.n_used,
        alpha0,
        z,
        critical_value,
        reject: z.abs() > critical_value,
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fgn_rho_values() {
        for j in 1..100 {
            assert!(fgn_rho(0.0, j).abs() < 1e-13);
        }
        assert!((fgn_rho(0.25, 1) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(fgn_rho(0.2, 3) > 0.0 && fgn_rho(-0.2, 1) < 0.0);
        assert_eq!(fgn_rho(0.1, 0), 1.0);
    }

    #[test]
    fn series_and_direct_forms_agree_at_the_switch() {
        for &alpha in &[-0.4, -0.1, 0.1, 0.2] {
            let a = 2.0 * alpha + 1.0;
            let j = FGN_SERIES_FROM as f64;
            let direct = 0.5 * ((j + 1.0).powf(a) - 2.0 * j.powf(a) + (j - 1.0).powf(a));
            let rel = (fgn_rho(alpha, FGN_SERIES_FROM) - direct).abs() / direct.abs();
            assert!(rel < 1e-9, "fgn {alpha}: {rel}");
            let j = DIAMOND_SERIES_FROM as f64;
            let t = |x: f64| x.powf(a);
            let direct = 0.5 / (4.0 - 2f64.powf(a))
                * (-t(j - 2.0) + 4.0 * t(j - 1.0) - 6.0 * t(j) + 4.0 * t(j + 1.0) - t(j + 2.0));
            let rel = (second_diff_rho(alpha, DIAMOND_SERIES_FROM) - direct).abs() / direct.abs();
            assert!(rel < 1e-6, "diamond {alpha}: {rel}");
        }
    }

    #[test]
    fn second_diff_rho_brownian() {
        assert_eq!(second_diff_rho(0.0, 0), 1.0);
        assert!((second_diff_rho(0.0, 1) + 0.5).abs() < 1e-15);
        assert!((second_diff_rho(0.0, -1) + 0.5).abs() < 1e-15);
        for j in 2..60 {
            assert!(second_diff_rho(0.0, j).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda2_brownian_values() {
        assert!((lambda2_scalar(0.0).unwrap() - 2.0).abs() < 1e-15);
        let m = lambda2_matrix(0.0).unwrap();
        assert!((m.l11 - 3.0).abs() < 1e-10);
        assert!((m.l12 - 1.5).abs() < 1e-10);
        assert!((m.l22 - 3.5).abs() < 1e-10);
        assert!((m.contrast_variance() - 3.5).abs() < 1e-10);
    }

    #[test]
    fn lambda2_domain() {
        assert!(matches!(lambda2_scalar(0.25), Err(Error::Domain(_))));
        assert!(matches!(lambda2_matrix(0.3), Err(Error::Domain(_))));
        assert!(lambda2_scalar(-0.25).unwrap() > 2.17);
    }

    #[test]
    fn lambda2_tail_correction_is_stable() {
        for &alpha in &[-0.4, 0.1, 0.2, 0.24] {
            let a = lambda2_scalar_with_terms(alpha, 500).unwrap();
            let b = lambda2_scalar_with_terms(alpha, 1000).unwrap();
            assert!((a - b).abs() < 1e-10, "{alpha}: {a} vs {b}");
        }
    }

    #[test]
    fn cof_of_affine_path_is_degenerate() {
        let p = SamplePath::new(0.1, (0..20).map(|i| 1.0 + 2.0 * i as f64).collect()).unwrap();
        assert!(matches!(cof_estimate(&p, 2.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn cof_relation_and_scale_invariance() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 7919) % 113) as f64 / 17.0).collect();
        let p = SamplePath::new(0.005, x).unwrap();
        let e = cof_estimate(&p, 2.0).unwrap();
        assert!((e.alpha_hat - (e.cof_value.log2() / 2.0 - 0.5)).abs() < 1e-15);
        let q = p.affine_transform(3.5, -2.0, 0.7).unwrap();
        let f = cof_estimate(&q, 2.0).unwrap();
        assert!((e.alpha_hat - f.alpha_hat).abs() < 1e-12);
    }
}
