//! Distributional checks of the estimators and tests under known laws.
//! Seeds are fixed, so every check is deterministic.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use lss_core::estimate::test_alpha;
use lss_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, Regime};
use lss_core::simulate::{subsample, ExactGaussian};
use lss_core::specfun::normal_cdf;
use lss_core::voltest::{read_critval_csv, rrv_confidence, unit_quantile_closed_form, vol_test_all};
use lss_core::{CritvalMethod, GammaKernelParams, Metric, RngSeed, SamplePath, SimGrid};

fn brownian_path(n: usize, seed: RngSeed) -> SamplePath {
    let mut rng = seed.rng();
    let sd = (1.0 / n as f64).sqrt();
    let mut x = 0.0;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    for _ in 0..n {
        x += sd * rng.sample::<f64, _>(StandardNormal);
        values.push(x);
    }
    SamplePath::new(1.0 / n as f64, values).unwrap()
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn z_statistic_is_standard_normal_under_the_null() {
    let alpha = -0.1;
    let p = GammaKernelParams::new(alpha, 1.0).unwrap();
    let sim = ExactGaussian::new(&p, 1.0, &SimGrid::new(2000, 1.0).unwrap()).unwrap();
    let z: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|r| {
            test_alpha(&sim.sample(RngSeed::new(4242, r)).unwrap(), 2.0, alpha, 0.05)
                .unwrap()
                .z
        })
        .collect();
    let d = ks_distance(z, normal_cdf);
    assert!(d <= 0.02, "KS distance {d}");
}

#[test]
fn vol_test_size_on_brownian_paths() {
    let reps = 4000u64;
    let method = CritvalMethod::ClosedForm;
    let rejections: Vec<[bool; 3]> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let path = brownian_path(2000, RngSeed::new(77, r));
            let res = vol_test_all(&path, 2.0, &Metric::ALL, &[0.05], &method).unwrap();
            [
                res[0].decisions[0].reject,
                res[1].decisions[0].reject,
                res[2].decisions[0].reject,
            ]
        })
        .collect();
    for (m, metric) in Metric::ALL.iter().enumerate() {
        let rate = rejections.iter().filter(|r| r[m]).count() as f64 / reps as f64;
        assert!((rate - 0.05).abs() <= 0.01, "{metric:?}: size {rate}");
    }
}

#[test]
fn closed_form_quantiles_match_large_monte_carlo_run() {
    // 10^6 bridges on a 10^4-point grid, seed 20240101, from `lss critvals`
    let file =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/bridge_critvals_n1000000_g10000_s20240101.csv");
    let rows = read_critval_csv(&file).unwrap();
    let mut checked = 0;
    for row in rows.iter().filter(|r| r.metric != Metric::L1) {
        let closed = unit_quantile_closed_form(row.metric, row.level).unwrap();
        let rel = (closed - row.quantile).abs() / closed;
        assert!(
            rel <= 0.005,
            "{:?} at {}: closed {closed} vs MC {}",
            row.metric,
            row.level,
            row.quantile
        );
        checked += 1;
    }
    assert_eq!(checked, 6);
    for row in rows.iter().filter(|r| r.metric == Metric::L1) {
        let builtin = unit_quantile_closed_form(Metric::L1, row.level).unwrap();
        assert_eq!(builtin, row.quantile);
    }
}

#[test]
fn rrv_interval_covers_at_nominal_rate() {
    let reps = 20_000u64;
    let hits = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let ci = rrv_confidence(&brownian_path(2000, RngSeed::new(88, r)), 2.0, 0.5, 0.05).unwrap();
            ci.lower <= 0.5 && 0.5 <= ci.upper
        })
        .count();
    let coverage = hits as f64 / reps as f64;
    assert!((coverage - 0.95).abs() <= 0.01, "coverage {coverage}");
}

#[test]
fn rrv_interval_width_shrinks_at_root_n_rate() {
    let (mut fine, mut coarse) = (0.0, 0.0);
    for r in 0..500u64 {
        let path = brownian_path(2000, RngSeed::new(99, r));
        let thin = subsample(&path, 4).unwrap();
        let a = rrv_confidence(&path, 2.0, 0.5, 0.05).unwrap();
        let b = rrv_confidence(&thin, 2.0, 0.5, 0.05).unwrap();
        fine += a.upper - a.lower;
        coarse += b.upper - b.lower;
    }
    let ratio = fine / coarse;
    assert!((ratio - 0.5).abs() <= 0.1, "width ratio {ratio}");
}

#[test]
fn vol_test_power_grows_with_n() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::VolPower, 505, vec![-0.125], vec![50, 500]);
    cfg.regime = Regime::StochVol;
    cfg.beta = vec![0.5];
    cfg.n_reps = 400;
    let table = run_experiment(&cfg).unwrap();
    let rows = table.summaries().unwrap();
    for metric in Metric::ALL {
        let rate = |n: usize| {
            rows.iter()
                .find(|r| r.n == n && r.metric == Some(metric))
                .unwrap()
                .rejection_rate
                .unwrap()
        };
        assert!(
            rate(500) >= rate(50),
            "{metric:?}: N=500 {} < N=50 {}",
            rate(500),
            rate(50)
        );
    }
}

#[test]
fn convolution_acf_matches_matern_for_smooth_kernels() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::AcfCheck, 3302, vec![0.2], vec![500]);
    cfg.regime = Regime::StochVol;
    cfg.subsample_factor = Some(1);
    cfg.simulator = lss_core::harness::SimulatorChoice::Convolution;
    let table = run_experiment(&cfg).unwrap();
    let rows: Vec<_> = table.acf().unwrap().iter().filter(|r| r.lag >= 1).collect();
    let inside = rows.iter().filter(|r| r.inside).count() as f64 / rows.len() as f64;
    assert!(inside >= 0.95, "{:.0}% of lags inside", 100.0 * inside);
}

#[test]
fn long_paths_have_mean_zero() {
    let p = GammaKernelParams::new(0.1, 1.0).unwrap();
    let sim = ExactGaussian::new(&p, 1.0, &SimGrid::new(1000, 100.0).unwrap()).unwrap();
    let means: Vec<f64> = (0..400u64)
        .map(|r| {
            let v = sim.sample(RngSeed::new(111, r)).unwrap().into_values();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(
        mean.abs() <= 3.0 * (var / n).sqrt(),
        "mean {mean}, se {}",
        (var / n).sqrt()
    );
}
