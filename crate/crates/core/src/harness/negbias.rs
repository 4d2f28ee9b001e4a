use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::GammaKernelParams;
use crate::simulate::{ExactGaussian, RngSeed, SimGrid};

use super::config::fnv1a;

/// Mean estimate on the first `n` increments of the simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBiasPoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_alpha_hat: f64,
    pub mc_stderr: f64,
    pub n_reps_effective: usize,
}

/// Spacing of the prefix lengths `N = 10, 20, ..., n_max`.
pub const NEGBIAS_STEP: usize = 10;

/// Quadratic-variation estimates of `alpha` on nested prefixes of the same
/// paths: each replication draws `n_max` increments (`lambda = 1`,
/// horizon 1, constant volatility) and is estimated at every multiple of
/// 10 up to `n_max`.
pub fn negbias_curve(alpha: f64, n_max: usize, n_reps: usize, seed: RngSeed) -> Result<Vec<NegBiasPoint>> {
    if n_max < 20 {
        return Err(Error::InvalidParameter(format!("n_max must be >= 20, got {n_max}")));
    }
    if n_reps < 1 {
        return Err(Error::InvalidParameter("n_reps must be >= 1".into()));
    }
    let params = GammaKernelParams::new(alpha, 1.0)?;
    let sim = ExactGaussian::new(&params, 1.0, &SimGrid::new(n_max, 1.0)?)?;
    let key = format!("negbias|{}|{alpha:?}|{n_max}", seed.stream_id);
    let reps: Vec<Vec<f64>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let stream = fnv1a(format!("{key}#{rep}").as_bytes());
            match sim.sample(RngSeed::new(seed.seed, stream)) {
                Ok(path) => prefix_estimates(path.values(), n_max),
                Err(_) => Vec::new(),
            }
        })
        .collect();
    let n_points = n_max / NEGBIAS_STEP;
    Ok((0..n_points)
        .map(|j| {
            let vals: Vec<f64> = reps
                .iter()
                .filter_map(|r| r.get(j).copied())
                .filter(|v| v.is_finite())
                .collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            NegBiasPoint {
                n: (j + 1) * NEGBIAS_STEP,
                mean_alpha_hat: mean,
                mc_stderr: (var / m).sqrt(),
                n_reps_effective: vals.len(),
            }
        })
        .collect())
}

/// `log2(V_2 / V_1) / 2 - 1/2` on every prefix of length multiple of
/// [`NEGBIAS_STEP`], accumulating the sums in the same order as a full
/// evaluation on the prefix.
fn prefix_estimates(x: &[f64], n_max: usize) -> Vec<f64> {
    let (mut v1, mut v2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n_max / NEGBIAS_STEP);
    for i in 2..=n_max {
        let d1 = x[i] - 2.0 * x[i - 1] + x[i - 2];
        v1 += d1 * d1;
        if i >= 4 {
            let d2 = x[i] - 2.0 * x[i - 2] + x[i - 4];
            v2 += d2 * d2;
        }
        if i % NEGBIAS_STEP == 0 {
            out.push((v2 / v1).log2() / 2.0 - 0.5);
        }
    }
    out
}
