use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::DEFAULT_TRUNCATION;
use crate::voltest::{BridgeMcConfig, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BiasRmse,
    AlphaTest,
    VolSize,
    VolPower,
    PStudy,
    AcfCheck,
    InfreqSampling,
    ErrorCurve,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::BiasRmse => "bias_rmse",
            ExperimentKind::AlphaTest => "alpha_test",
            ExperimentKind::VolSize => "vol_size",
            ExperimentKind::VolPower => "vol_power",
            ExperimentKind::PStudy => "p_study",
            ExperimentKind::AcfCheck => "acf_check",
            ExperimentKind::InfreqSampling => "infreq_sampling",
            ExperimentKind::ErrorCurve => "error_curve",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParameter(format!("unknown experiment kind '{s}'")))
    }
}

/// Volatility regime of the simulated process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Constant volatility, exact Gaussian simulation.
    #[serde(rename = "A_constant")]
    Constant,
    /// Exp-OU volatility independent of the driver.
    #[serde(rename = "B_stochvol")]
    StochVol,
    /// Exp-OU volatility correlated with the driver.
    #[serde(rename = "C_leverage")]
    Leverage,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Constant => "A_constant",
            Regime::StochVol => "B_stochvol",
            Regime::Leverage => "C_leverage",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which simulator produces the paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorChoice {
    /// Exact Gaussian for constant volatility, convolution otherwise.
    #[default]
    Auto,
    Exact,
    Convolution,
}

fn default_lambda() -> Vec<f64> {
    vec![1.0]
}
fn default_horizon() -> Vec<f64> {
    vec![1.0]
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_beta() -> Vec<f64> {
    vec![5.0]
}
fn default_rho() -> Vec<f64> {
    vec![-0.5]
}
fn default_levels() -> Vec<f64> {
    vec![0.05]
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}
fn default_reps() -> usize {
    2000
}
fn default_max_lag() -> usize {
    50
}
fn default_m_time() -> f64 {
    20.0
}

/// One Monte Carlo experiment: the cartesian product of the grids, each
/// cell replicated `n_reps` times.
///
/// `delta`, when non-empty, replaces `horizon` by `T = N delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    pub base_seed: u64,
    pub alpha: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default)]
    pub alpha0: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Subsampling factor; by default 10 for `alpha < 0` and 1 otherwise
    /// under the convolution scheme.
    #[serde(default)]
    pub subsample_factor: Option<usize>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub simulator: SimulatorChoice,
    /// Largest lag of the autocorrelation check.
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Evaluation time of the error curve; defaults to the horizon.
    #[serde(default)]
    pub t_eval: Option<f64>,
    /// Truncation depth of the error curve in time units.
    #[serde(default = "default_m_time")]
    pub m_time: f64,
    /// Monte Carlo bridge quantiles instead of the closed forms.
    #[serde(default)]
    pub bridge_mc: Option<BridgeMcConfig>,
}

fn default_regime() -> Regime {
    Regime::Constant
}

impl ExperimentConfig {
    /// A config with the given kind, seed, smoothness and sample sizes; all
    /// other settings at their defaults.
    pub fn new(experiment: ExperimentKind, base_seed: u64, alpha: Vec<f64>, n: Vec<usize>) -> Self {
        Self {
            experiment,
            regime: default_regime(),
            n_reps: default_reps(),
            base_seed,
            alpha,
            lambda: default_lambda(),
            n,
            horizon: default_horizon(),
            delta: Vec::new(),
            p: default_p(),
            alpha0: Vec::new(),
            beta: default_beta(),
            rho: default_rho(),
            metrics: default_metrics(),
            levels: default_levels(),
            subsample_factor: None,
            truncation: default_truncation(),
            simulator: SimulatorChoice::Auto,
            max_lag: default_max_lag(),
            t_eval: None,
            m_time: default_m_time(),
            bridge_mc: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_reps < 1 {
            return bad("n_reps must be >= 1".into());
        }
        let empty = |name: &str, len: usize| -> Result<()> {
            if len == 0 {
                return bad(format!("grid '{name}' must be nonempty"));
            }
            Ok(())
        };
        empty("alpha", self.alpha.len())?;
        empty("lambda", self.lambda.len())?;
        empty("n", self.n.len())?;
        empty("p", self.p.len())?;
        empty("levels", self.levels.len())?;
        if self.delta.is_empty() {
            empty("horizon", self.horizon.len())?;
        }
        if self.regime != Regime::Constant {
            empty("beta", self.beta.len())?;
        }
        if self.regime == Regime::Leverage {
            empty("rho", self.rho.len())?;
        }
        if matches!(self.experiment, ExperimentKind::VolSize | ExperimentKind::VolPower) {
            empty("metrics", self.metrics.len())?;
        }
        if self.experiment == ExperimentKind::AlphaTest {
            empty("alpha0", self.alpha0.len())?;
        }
        for &a in &self.alpha {
            if !(a > -0.5 && a < 0.5) {
                return bad(format!("alpha must lie in (-1/2, 1/2), got {a}"));
            }
        }
        for &l in &self.levels {
            if !(l > 0.0 && l < 1.0) {
                return bad(format!("levels must lie in (0, 1), got {l}"));
            }
        }
        if self.truncation < 1 || self.subsample_factor == Some(0) {
            return bad("truncation and subsample_factor must be >= 1".into());
        }
        if self.n.iter().any(|&n| n < 4) {
            return bad("every N must be >= 4".into());
        }
        if self.experiment == ExperimentKind::AcfCheck && self.n.iter().any(|&n| n <= self.max_lag) {
            return bad("max_lag must be below every N".into());
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON form, used in output file names.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        fnv1a(json.as_bytes())
    }

    /// `<experiment>_<hash>.csv`.
    pub fn output_file_name(&self) -> String {
        format!("{}_{:016x}.csv", self.experiment, self.hash())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
