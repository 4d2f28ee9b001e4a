//! Upper quantiles of functionals of the standard Brownian bridge on
//! `[0, 1]`: `int |B|` (L1), `int B^2` (L2, Cramér-von Mises) and
//! `sup |B|` (Kolmogorov).

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::RngSeed;

/// Distance used to compare the relative-variation path with its null
/// limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    L1,
    L2,
    Sup,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::L1, Metric::L2, Metric::Sup];

    /// Degree of homogeneity of the statistic in the path scale: the L2
    /// statistic is a squared distance.
    pub fn scale_power(self) -> i32 {
        match self {
            Metric::L2 => 2,
            Metric::L1 | Metric::Sup => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::L1 => "L1",
            Metric::L2 => "L2",
            Metric::Sup => "Sup",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Metric::L1),
            "l2" | "cvm" => Ok(Metric::L2),
            "sup" | "ks" => Ok(Metric::Sup),
            _ => Err(Error::InvalidParameter(format!(
                "unknown metric '{s}' (expected L1, L2 or Sup)"
            ))),
        }
    }
}

/// Levels with a built-in L1 quantile.
pub const STANDARD_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

/// Upper quantiles of `int_0^1 |B(t)| dt` at [`STANDARD_LEVELS`], from
/// 10^6 bridges on a 10^4-point grid (`lss critvals --metric L1
/// --n-mc 1000000 --grid 10000 --seed 20240101`).
const L1_TABLE: [f64; 3] = [
    0.751_902_328_614_604_3,
    0.581_963_425_006_686_2,
    0.499_368_610_110_452_2,
];

/// Overshoot correction for the maximum of a discretely sampled Brownian
/// bridge: `-zeta(1/2) / sqrt(2 pi)`.
pub const SUP_DISCRETE_CORRECTION: f64 = 0.582_597_157_939_010_7;

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// `P(sup |B| > x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2}`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        // the alternating series converges slowly here; the true value
        // is 1 to double precision
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `P(int B^2 > x)` from Smirnov's series of integrals over
/// `s in ((2k-1) pi, 2k pi)`.
pub fn cvm_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..100 {
        let a = (2 * k - 1) as f64 * PI;
        let b = 2.0 * k as f64 * PI;
        let term = smirnov_piece(x, a, b);
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (total / PI).clamp(0.0, 1.0)
}

/// `int_a^b 2 sqrt(-s / sin s) e^{-x s^2 / 2} / s ds` with the inverse
/// square-root endpoint singularities removed by `s = a + (b-a) sin^2(phi/2)`.
fn smirnov_piece(x: f64, a: f64, b: f64) -> f64 {
    const NODES: usize = 400;
    let w = b - a;
    let f = |phi: f64| -> f64 {
        if phi <= 0.0 || phi >= PI {
            // the limit at both ends: sqrt(s / (w sin^2)) * w sin(phi) / 2 -> sqrt(s w) / 2 * ... (phi -> 0 cancels)
            let s = if phi <= 0.0 { a } else { b };
            return 2.0 * (s / w).sqrt() * (-0.5 * x * s * s).exp() / s * w;
        }
        let (sh, ch) = ((0.5 * phi).sin(), (0.5 * phi).cos());
        let eps = w * sh * sh;
        let eta = w * ch * ch;
        let s = a + eps;
        // sin(s) = -sin(eps) = -sin(eta) for odd multiples of pi at a
        let sin_abs = eps.min(eta).sin();
        let ds = 0.5 * w * phi.sin();
        2.0 * (s / sin_abs).sqrt() * (-0.5 * x * s * s).exp() / s * ds
    };
    // composite Simpson on [0, pi]
    let h = PI / NODES as f64;
    let mut acc = f(0.0) + f(PI);
    for i in 1..NODES {
        let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += wgt * f(i as f64 * h);
    }
    acc * h / 3.0
}

fn invert_sf(sf: impl Fn(f64) -> f64, level: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Upper `level` quantile of the metric applied to a standard bridge:
/// Kolmogorov and Cramér-von Mises from their series, L1 from the built-in
/// table (standard levels only).
pub fn unit_quantile_closed_form(metric: Metric, level: f64) -> Result<f64> {
    check_level(level)?;
    match metric {
        Metric::Sup => Ok(invert_sf(kolmogorov_sf, level, 0.2, 5.0)),
        Metric::L2 => Ok(invert_sf(cvm_sf, level, 1e-4, 5.0)),
        Metric::L1 => STANDARD_LEVELS
            .iter()
            .position(|l| (l - level).abs() < 1e-12)
            .map(|i| L1_TABLE[i])
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no built-in L1 quantile at level {level}; use Monte Carlo critical values"
                ))
            }),
    }
}

/// Settings of the Monte Carlo over discretized bridges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeMcConfig {
    pub n_mc: usize,
    pub grid: usize,
    pub seed: u64,
}

impl Default for BridgeMcConfig {
    fn default() -> Self {
        Self {
            n_mc: 1_000_000,
            grid: 10_000,
            seed: 20_240_101,
        }
    }
}

/// How critical values are obtained.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CritvalMethod {
    /// Series for Sup and L2, built-in table for L1.
    #[default]
    ClosedForm,
    /// Monte Carlo for every metric, optionally cached on disk.
    MonteCarlo {
        config: BridgeMcConfig,
        cache_dir: Option<PathBuf>,
    },
    /// Unit quantiles computed earlier, e.g. by [`bridge_quantiles_mc`].
    Precomputed(Vec<CritvalRow>),
}

impl CritvalMethod {
    /// Resolves Monte Carlo settings into a table so that repeated lookups
    /// do not rerun the simulation.
    pub fn resolve(&self, levels: &[f64]) -> Result<CritvalMethod> {
        match self {
            CritvalMethod::MonteCarlo { config, cache_dir } => Ok(CritvalMethod::Precomputed(bridge_quantiles_cached(
                config,
                levels,
                cache_dir.as_deref(),
            )?)),
            other => Ok(other.clone()),
        }
    }
}

/// Functionals of one discretized bridge.
#[derive(Debug, Clone, Copy)]
struct BridgeDraw {
    l1: f64,
    l2: f64,
    sup: f64,
}

fn draw_bridge(grid: usize, seed: RngSeed, buf: &mut Vec<f64>) -> BridgeDraw {
    let mut rng = seed.rng();
    let h = 1.0 / grid as f64;
    let sd = h.sqrt();
    buf.clear();
    let mut w = 0.0;
    for _ in 0..grid {
        let z: f64 = rng.sample(StandardNormal);
        w += sd * z;
        buf.push(w);
    }
    let end = w;
    let (mut l1, mut l2, mut sup) = (0.0, 0.0, 0.0f64);
    for (i, wi) in buf.iter().enumerate().take(grid - 1) {
        let b = wi - (i + 1) as f64 * h * end;
        l1 += b.abs();
        l2 += b * b;
        sup = sup.max(b.abs());
    }
    BridgeDraw {
        l1: l1 * h,
        l2: l2 * h,
        sup: sup + SUP_DISCRETE_CORRECTION * sd,
    }
}

/// Empirical upper quantile with linear interpolation between order
/// statistics.
fn upper_quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = (1.0 - level) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// One cached row: the unit-scale quantile of `metric` at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CritvalRow {
    pub metric: Metric,
    pub c: f64,
    pub level: f64,
    pub quantile: f64,
    pub n_mc: usize,
    pub grid: usize,
    pub seed: u64,
}

/// Monte Carlo unit quantiles for all metrics at the given levels.
pub fn bridge_quantiles_mc(config: &BridgeMcConfig, levels: &[f64]) -> Result<Vec<CritvalRow>> {
    for &l in levels {
        check_level(l)?;
    }
    if config.n_mc < 10 || config.grid < 2 {
        return Err(Error::InvalidParameter(
            "bridge Monte Carlo needs n_mc >= 10 and grid >= 2".into(),
        ));
    }
    let draws: Vec<BridgeDraw> = (0..config.n_mc as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            draw_bridge(config.grid, RngSeed::new(config.seed, r), buf)
        })
        .collect();
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        let mut v: Vec<f64> = draws
            .iter()
            .map(|d| match metric {
                Metric::L1 => d.l1,
                Metric::L2 => d.l2,
                Metric::Sup => d.sup,
            })
            .collect();
        v.sort_by(f64::total_cmp);
        for &level in levels {
            rows.push(CritvalRow {
                metric,
                c: 1.0,
                level,
                quantile: upper_quantile(&v, level),
                n_mc: config.n_mc,
                grid: config.grid,
                seed: config.seed,
            });
        }
    }
    Ok(rows)
}

fn cache_file(dir: &Path, config: &BridgeMcConfig) -> PathBuf {
    dir.join(format!(
        "bridge_critvals_n{}_g{}_s{}.csv",
        config.n_mc, config.grid, config.seed
    ))
}

pub fn write_critval_csv(path: &Path, rows: &[CritvalRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_critval_csv(path: &Path) -> Result<Vec<CritvalRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Monte Carlo unit quantiles, read from or written to `cache_dir` when
/// given. Cached rows are reused only if they cover every requested level.
pub fn bridge_quantiles_cached(
    config: &BridgeMcConfig,
    levels: &[f64],
    cache_dir: Option<&Path>,
) -> Result<Vec<CritvalRow>> {
    if let Some(dir) = cache_dir {
        let file = cache_file(dir, config);
        if file.exists() {
            let rows = read_critval_csv(&file)?;
            let covered = levels.iter().all(|l| {
                Metric::ALL
                    .iter()
                    .all(|m| rows.iter().any(|r| r.metric == *m && (r.level - l).abs() < 1e-12))
            });
            if covered {
                return Ok(rows);
            }
        }
        let rows = bridge_quantiles_mc(config, levels)?;
        fs::create_dir_all(dir)?;
        write_critval_csv(&file, &rows)?;
        return Ok(rows);
    }
    bridge_quantiles_mc(config, levels)
}

/// Critical values of `metric` applied to `scale_c` times a standard
/// bridge, one per level, in the order given.
pub fn bridge_critical_values(
    metric: Metric,
    scale_c: f64,
    levels: &[f64],
    method: &CritvalMethod,
) -> Result<Vec<f64>> {
    if !(scale_c > 0.0) || !scale_c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bridge scale must be positive, got {scale_c}"
        )));
    }
    let unit = unit_quantiles(metric, levels, method)?;
    let factor = scale_c.powi(metric.scale_power());
    Ok(unit.into_iter().map(|q| q * factor).collect())
}

pub(crate) fn unit_quantiles(metric: Metric, levels: &[f64], method: &CritvalMethod) -> Result<Vec<f64>> {
    match method {
        CritvalMethod::ClosedForm => levels.iter().map(|&l| unit_quantile_closed_form(metric, l)).collect(),
        CritvalMethod::MonteCarlo { config, cache_dir } => {
            let rows = bridge_quantiles_cached(config, levels, cache_dir.as_deref())?;
            lookup(&rows, metric, levels)
        }
        CritvalMethod::Precomputed(rows) => lookup(rows, metric, levels),
    }
}

fn lookup(rows: &[CritvalRow], metric: Metric, levels: &[f64]) -> Result<Vec<f64>> {
    levels
        .iter()
        .map(|&l| {
            rows.iter()
                .find(|r| r.metric == metric && (r.level - l).abs() < 1e-12)
                .map(|r| r.quantile)
                .ok_or_else(|| Error::Data(format!("no cached quantile for {metric} at {l}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_quantiles() {
        let q = unit_quantile_closed_form(Metric::Sup, 0.05).unwrap();
        assert!((q - 1.358_098_6).abs() < 1e-6, "{q}");
        let q = unit_quantile_closed_form(Metric::Sup, 0.01).unwrap();
        assert!((q - 1.627_623_1).abs() < 1e-6, "{q}");
    }

    #[test]
    fn cramer_von_mises_quantiles() {
        let q = unit_quantile_closed_form(Metric::L2, 0.05).unwrap();
        assert!((q - 0.461_36).abs() < 5e-5, "{q}");
        let q = unit_quantile_closed_form(Metric::L2, 0.10).unwrap();
        assert!((q - 0.347_30).abs() < 5e-5, "{q}");
    }

    #[test]
    fn cvm_mean_from_survival() {
        // E int B^2 = 1/6
        let h = 1e-3;
        let mean: f64 = (0..5000).map(|i| cvm_sf((i as f64 + 0.5) * h) * h).sum();
        assert!((mean - 1.0 / 6.0).abs() < 1e-5, "{mean}");
    }

    #[test]
    fn critical_values_are_homogeneous() {
        let levels = [0.05];
        let m = CritvalMethod::ClosedForm;
        let a = bridge_critical_values(Metric::Sup, 2.0, &levels, &m).unwrap()[0];
        let b = bridge_critical_values(Metric::Sup, 1.0, &levels, &m).unwrap()[0];
        assert!((a - 2.0 * b).abs() < 1e-12);
        let a = bridge_critical_values(Metric::L2, 2.0, &levels, &m).unwrap()[0];
        let b = bridge_critical_values(Metric::L2, 1.0, &levels, &m).unwrap()[0];
        assert!((a - 4.0 * b).abs() < 1e-12);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("l2".parse::<Metric>().unwrap(), Metric::L2);
        assert_eq!("Sup".parse::<Metric>().unwrap(), Metric::Sup);
        assert!("L3".parse::<Metric>().is_err());
    }

    #[test]
    fn small_monte_carlo_is_reasonable() {
        let cfg = BridgeMcConfig {
            n_mc: 20_000,
            grid: 500,
            seed: 3,
        };
        let rows = bridge_quantiles_mc(&cfg, &[0.05]).unwrap();
        let get = |m| rows.iter().find(|r| r.metric == m).unwrap().quantile;
        assert!((get(Metric::Sup) - 1.358).abs() < 0.03);
        assert!((get(Metric::L2) - 0.4614).abs() < 0.02);
    }
}
