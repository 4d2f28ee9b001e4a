use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx_error::{error_curve, ErrorCurvePoint};
use crate::error::{Error, Result};
use crate::estimate::{cof_estimate, test_alpha_from};
use crate::io::write_records;
use crate::kernel::{matern_rho, GammaKernelParams, ProcessMoments};
use crate::simulate::{ConvolutionScheme, ExactGaussian, RngSeed, SamplePath, SimGrid, VolatilitySpec};
use crate::specfun::normal_quantile;
use crate::voltest::{vol_test_all, CritvalMethod, Metric};

use super::config::{fnv1a, ExperimentConfig, ExperimentKind, Regime, SimulatorChoice};

/// Aggregate of one output row: an estimator cell or one rejection rate.
///
/// Estimator rows fill `mean_estimate`, `bias` and `rmse`; test rows fill
/// `rejection_rate` and the coordinate (`alpha0` or `metric`) and `level`
/// it belongs to. `mc_stderr` is the Monte Carlo standard error of
/// `bias` or of `rejection_rate` respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub experiment: ExperimentKind,
    pub regime: Regime,
    pub simulator: String,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub horizon: f64,
    pub delta: f64,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub k: usize,
    pub p: f64,
    pub alpha0: Option<f64>,
    pub metric: Option<Metric>,
    pub level: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub mc_stderr: f64,
    pub n_reps: usize,
    pub n_reps_effective: usize,
}

/// Pooled autocorrelation at one lag against the Matérn correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfRow {
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub regime: Regime,
    pub lag: usize,
    pub lag_time: f64,
    pub rho_theory: f64,
    pub rho_empirical: f64,
    pub band_lower: f64,
    pub band_upper: f64,
    pub inside: bool,
    pub n_reps_effective: usize,
}

/// Output of an experiment; each variant has its own CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentTable {
    Summary(Vec<McSummary>),
    Acf(Vec<AcfRow>),
    ErrorCurve(Vec<ErrorCurvePoint>),
}

impl ExperimentTable {
    pub fn len(&self) -> usize {
        match self {
            ExperimentTable::Summary(v) => v.len(),
            ExperimentTable::Acf(v) => v.len(),
            ExperimentTable::ErrorCurve(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn summaries(&self) -> Option<&[McSummary]> {
        match self {
            ExperimentTable::Summary(v) => Some(v),
            _ => None,
        }
    }

    pub fn acf(&self) -> Option<&[AcfRow]> {
        match self {
            ExperimentTable::Acf(v) => Some(v),
            _ => None,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        match self {
            ExperimentTable::Summary(v) => write_records(v, out),
            ExperimentTable::Acf(v) => write_records(v, out),
            ExperimentTable::ErrorCurve(v) => write_records(v, out),
        }
    }
}

/// Runs the experiment on the global thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::ErrorCurve => run_error_curve(config),
        ExperimentKind::AcfCheck => run_acf(config),
        _ => run_summary(config),
    }
}

/// Runs the experiment on a dedicated pool of `workers` threads. The output
/// does not depend on the number of workers.
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ExperimentTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| run_experiment(config))
}

/// Process coordinates of a cell; everything that changes the simulated
/// law.
#[derive(Debug, Clone, Copy)]
struct Cell {
    alpha: f64,
    lambda: f64,
    n: usize,
    horizon: f64,
    beta: Option<f64>,
    rho: Option<f64>,
}

impl Cell {
    fn delta(&self) -> f64 {
        self.horizon / self.n as f64
    }
}

fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let vols: Vec<(Option<f64>, Option<f64>)> = match config.regime {
        Regime::Constant => vec![(None, None)],
        Regime::StochVol => config.beta.iter().map(|&b| (Some(b), Some(0.0))).collect(),
        Regime::Leverage => config
            .beta
            .iter()
            .flat_map(|&b| config.rho.iter().map(move |&r| (Some(b), Some(r))))
            .collect(),
    };
    let mut out = Vec::new();
    for &alpha in &config.alpha {
        for &lambda in &config.lambda {
            for &n in &config.n {
                let horizons: Vec<f64> = if config.delta.is_empty() {
                    config.horizon.clone()
                } else {
                    config.delta.iter().map(|d| d * n as f64).collect()
                };
                for &horizon in &horizons {
                    for &(beta, rho) in &vols {
                        out.push(Cell {
                            alpha,
                            lambda,
                            n,
                            horizon,
                            beta,
                            rho,
                        });
                    }
                }
            }
        }
    }
    out
}

/// A simulator prepared once per cell and sampled once per replication.
enum CellSimulator {
    Exact(ExactGaussian),
    Convolution(ConvolutionScheme),
}

impl CellSimulator {
    fn build(config: &ExperimentConfig, cell: &Cell) -> Result<(Self, usize)> {
        let params = GammaKernelParams::new(cell.alpha, cell.lambda)?;
        let vol = match (cell.beta, cell.rho) {
            (Some(b), Some(r)) => VolatilitySpec::exp_ou(b, r)?,
            _ => VolatilitySpec::constant(1.0)?,
        };
        let exact = match config.simulator {
            SimulatorChoice::Auto => config.regime == Regime::Constant,
            SimulatorChoice::Exact => true,
            SimulatorChoice::Convolution => false,
        };
        if exact {
            if config.regime != Regime::Constant {
                return Err(Error::InvalidParameter(
                    "the exact simulator needs constant volatility".into(),
                ));
            }
            let grid = SimGrid::new(cell.n, cell.horizon)?;
            return Ok((CellSimulator::Exact(ExactGaussian::new(&params, 1.0, &grid)?), 1));
        }
        let k = config.subsample_factor.unwrap_or(if cell.alpha < 0.0 { 10 } else { 1 });
        let grid = SimGrid::with_options(cell.n, cell.horizon, config.truncation, k)?;
        Ok((
            CellSimulator::Convolution(ConvolutionScheme::new(&params, vol, grid)?),
            k,
        ))
    }

    fn name(&self) -> &'static str {
        match self {
            CellSimulator::Exact(_) => "exact",
            CellSimulator::Convolution(_) => "convolution",
        }
    }

    fn sample(&self, seed: RngSeed) -> Result<SamplePath> {
        match self {
            CellSimulator::Exact(s) => s.sample(seed),
            CellSimulator::Convolution(s) => s.sample(seed),
        }
    }
}

fn cell_key(config: &ExperimentConfig, cell: &Cell, k: usize, sim: &str) -> String {
    format!(
        "{}|{}|{}|a={:?}|l={:?}|n={}|T={:?}|b={:?}|r={:?}|k={}|M={}",
        config.experiment,
        config.regime,
        sim,
        cell.alpha,
        cell.lambda,
        cell.n,
        cell.horizon,
        cell.beta,
        cell.rho,
        k,
        config.truncation
    )
}

fn rep_seed(base: u64, key: &str, rep: usize) -> RngSeed {
    RngSeed::new(base, fnv1a(format!("{key}#{rep}").as_bytes()))
}

/// Draws the replications of one cell in parallel and returns them in
/// replication order.
fn replicate<T: Send>(
    config: &ExperimentConfig,
    sim: &CellSimulator,
    key: &str,
    f: impl Fn(&SamplePath) -> T + Sync,
    on_fail: impl Fn() -> T + Sync,
) -> Vec<T> {
    (0..config.n_reps)
        .into_par_iter()
        .map(|rep| match sim.sample(rep_seed(config.base_seed, key, rep)) {
            Ok(path) => f(&path),
            Err(_) => on_fail(),
        })
        .collect()
}

/// What a slot of a replication measures.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Estimate { p: f64 },
    AlphaReject { p: f64, alpha0: f64, level: f64 },
    VolReject { p: f64, metric: Metric, level: f64 },
}

fn slots(config: &ExperimentConfig) -> Vec<Slot> {
    let mut out = Vec::new();
    for &p in &config.p {
        match config.experiment {
            ExperimentKind::AlphaTest => {
                for &alpha0 in &config.alpha0 {
                    for &level in &config.levels {
                        out.push(Slot::AlphaReject { p, alpha0, level });
                    }
                }
            }
            ExperimentKind::VolSize | ExperimentKind::VolPower => {
                for &metric in &config.metrics {
                    for &level in &config.levels {
                        out.push(Slot::VolReject { p, metric, level });
                    }
                }
            }
            _ => out.push(Slot::Estimate { p }),
        }
    }
    out
}

fn critval_method(config: &ExperimentConfig) -> CritvalMethod {
    match config.bridge_mc {
        Some(c) => CritvalMethod::MonteCarlo {
            config: c,
            cache_dir: std::env::var_os(crate::voltest::CRITVAL_CACHE_ENV).map(Into::into),
        },
        None => CritvalMethod::ClosedForm,
    }
}

/// One value per slot; `None` marks a failed replication for that slot.
fn evaluate(config: &ExperimentConfig, slots: &[Slot], path: &SamplePath, method: &CritvalMethod) -> Vec<Option<f64>> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut out = vec![None; slots.len()];
    for &p in &config.p {
        let idx: Vec<usize> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| match s {
                Slot::Estimate { p: q } | Slot::AlphaReject { p: q, .. } | Slot::VolReject { p: q, .. } => *q == p,
            })
            .map(|(i, _)| i)
            .collect();
        match config.experiment {
            ExperimentKind::VolSize | ExperimentKind::VolPower => {
                let Ok(results) = vol_test_all(path, p, &config.metrics, &config.levels, method) else {
                    continue;
                };
                for &i in &idx {
                    if let Slot::VolReject { metric, level, .. } = slots[i] {
                        out[i] = results
                            .iter()
                            .find(|r| r.metric == metric)
                            .and_then(|r| r.reject_at(level))
                            .map(flag);
                    }
                }
            }
            _ => {
                let Ok(est) = cof_estimate(path, p) else { continue };
                for &i in &idx {
                    out[i] = match slots[i] {
                        Slot::Estimate { .. } => Some(est.alpha_hat),
                        Slot::AlphaReject { alpha0, level, .. } => {
                            test_alpha_from(&est, alpha0, level).ok().map(|t| flag(t.reject))
                        }
                        Slot::VolReject { .. } => None,
                    };
                }
            }
        }
    }
    out
}

fn run_summary(config: &ExperimentConfig) -> Result<ExperimentTable> {
    let slots = slots(config);
    let method = critval_method(config).resolve(&config.levels)?;
    let mut rows = Vec::new();
    for cell in cells(config) {
        let (sim, k) = CellSimulator::build(config, &cell)?;
        let key = cell_key(config, &cell, k, sim.name());
        let reps = replicate(
            config,
            &sim,
            &key,
            |path| evaluate(config, &slots, path, &method),
            || vec![None; slots.len()],
        );
        for (j, slot) in slots.iter().enumerate() {
            let values: Vec<f64> = reps.iter().filter_map(|r| r[j]).collect();
            rows.push(summarize(config, &cell, k, sim.name(), *slot, &values));
        }
    }
    Ok(ExperimentTable::Summary(rows))
}

fn summarize(config: &ExperimentConfig, cell: &Cell, k: usize, sim: &str, slot: Slot, values: &[f64]) -> McSummary {
    let m = values.len();
    let mf = m as f64;
    let mean = if m > 0 {
        values.iter().sum::<f64>() / mf
    } else {
        f64::NAN
    };
    let mut row = McSummary {
        experiment: config.experiment,
        regime: config.regime,
        simulator: sim.to_string(),
        alpha: cell.alpha,
        lambda: cell.lambda,
        n: cell.n,
        horizon: cell.horizon,
        delta: cell.delta(),
        beta: cell.beta,
        rho: cell.rho,
        k,
        p: 0.0,
        alpha0: None,
        metric: None,
        level: None,
        mean_estimate: None,
        bias: None,
        rmse: None,
        rejection_rate: None,
        mc_stderr: f64::NAN,
        n_reps: config.n_reps,
        n_reps_effective: m,
    };
    match slot {
        Slot::Estimate { p } => {
            row.p = p;
            let mse = values.iter().map(|a| (a - cell.alpha).powi(2)).sum::<f64>() / mf;
            let var = if m > 1 {
                values.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (mf - 1.0)
            } else {
                f64::NAN
            };
            row.mean_estimate = Some(mean);
            row.bias = Some(mean - cell.alpha);
            row.rmse = Some(mse.sqrt());
            row.mc_stderr = (var / mf).sqrt();
        }
        Slot::AlphaReject { p, alpha0, level } => {
            row.p = p;
            row.alpha0 = Some(alpha0);
            row.level = Some(level);
            row.rejection_rate = Some(mean);
            row.mc_stderr = (mean * (1.0 - mean) / mf).sqrt();
        }
        Slot::VolReject { p, metric, level } => {
            row.p = p;
            row.metric = Some(metric);
            row.level = Some(level);
            row.rejection_rate = Some(mean);
            row.mc_stderr = (mean * (1.0 - mean) / mf).sqrt();
        }
    }
    row
}

/// Lagged second moments `sum_i X_i X_{i+h} / (N + 1 - h)`, `h = 0..=max_lag`.
fn lag_products(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|h| {
            let n = x.len() - h;
            x[..n].iter().zip(&x[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
        })
        .collect()
}

fn run_acf(config: &ExperimentConfig) -> Result<ExperimentTable> {
    let z = normal_quantile(1.0 - 0.5 * config.levels[0])?;
    let mut rows = Vec::new();
    for cell in cells(config) {
        let params = GammaKernelParams::new(cell.alpha, cell.lambda)?;
        let (sim, k) = CellSimulator::build(config, &cell)?;
        let key = cell_key(config, &cell, k, sim.name());
        let reps: Vec<Option<Vec<f64>>> = replicate(
            config,
            &sim,
            &key,
            |path| Some(lag_products(path.values(), config.max_lag)),
            || None,
        );
        let ok: Vec<&Vec<f64>> = reps.iter().flatten().collect();
        let r = ok.len() as f64;
        let mean_at = |h: usize| ok.iter().map(|v| v[h]).sum::<f64>() / r;
        let b = mean_at(0);
        for h in 0..=config.max_lag {
            let a = mean_at(h);
            let rho = a / b;
            // delta method for a ratio of means
            let var = ok.iter().map(|v| (v[h] - rho * v[0]).powi(2)).sum::<f64>() / (r - 1.0);
            let se = (var / r).sqrt() / b;
            let lag_time = h as f64 * cell.delta();
            let theory = matern_rho(&params, lag_time)?;
            rows.push(AcfRow {
                alpha: cell.alpha,
                lambda: cell.lambda,
                n: cell.n,
                k,
                regime: config.regime,
                lag: h,
                lag_time,
                rho_theory: theory,
                rho_empirical: rho,
                band_lower: rho - z * se,
                band_upper: rho + z * se,
                inside: (theory - rho).abs() <= z * se,
                n_reps_effective: ok.len(),
            });
        }
    }
    Ok(ExperimentTable::Acf(rows))
}

fn run_error_curve(config: &ExperimentConfig) -> Result<ExperimentTable> {
    let mut rows = Vec::new();
    for &alpha in &config.alpha {
        for &lambda in &config.lambda {
            let params = GammaKernelParams::new(alpha, lambda)?;
            for &horizon in &config.horizon {
                let t = config.t_eval.unwrap_or(horizon);
                rows.extend(error_curve(
                    &params,
                    &ProcessMoments::UNIT,
                    &config.n,
                    t,
                    config.m_time,
                )?);
            }
        }
    }
    Ok(ExperimentTable::ErrorCurve(rows))
}
