//! `lss`: simulate semistationary processes, estimate their smoothness and
//! test for constant volatility.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lss_core::approx_error::error_curve_with;
use lss_core::estimate::{cof_estimate, test_alpha};
use lss_core::harness::{
    negbias_curve, run_experiment_with_workers, ExperimentConfig, ExperimentKind, Regime, SimulatorChoice,
};
use lss_core::io::{read_path_csv, write_error_curve_csv, write_json, write_path_csv, write_records, write_rrv_csv};
use lss_core::simulate::{simulate_convolution, simulate_exact_gaussian};
use lss_core::variation::rrv;
use lss_core::voltest::{
    bridge_quantiles_cached, rrv_confidence, unit_quantile_closed_form, vol_test_with, BridgeMcConfig, CritvalRow,
    CRITVAL_CACHE_ENV,
};
use lss_core::{
    C3Form, CritvalMethod, Error, GammaKernelParams, Metric, ProcessMoments, RngSeed, SamplePath, SimGrid,
    VolatilitySpec,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "lss",
    version,
    about = "Lévy/Brownian semistationary processes: simulation and power-variation inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write it as a `t,x` CSV.
    Simulate(SimulateArgs),
    /// Compare the pooled empirical autocorrelation of simulated paths with the Matérn correlation.
    AcfCheck(AcfArgs),
    /// Closed-form discretization error for a list of sample sizes.
    ErrorCurve(ErrorCurveArgs),
    /// Estimate alpha from a `t,x` CSV.
    EstimateAlpha(EstimateArgs),
    /// Test H0: alpha = alpha0 on a `t,x` CSV.
    TestAlpha(TestAlphaArgs),
    /// Test constant volatility on a `t,x` CSV.
    TestVol(TestVolArgs),
    /// Run a Monte Carlo experiment from a TOML config, or the nested-prefix bias curve.
    Mc(McArgs),
    /// Critical values of Brownian-bridge functionals.
    Critvals(CritvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    /// Exact Gaussian for constant volatility, convolution otherwise.
    Auto,
    Exact,
    Convolution,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Number of increments N.
    #[arg(long)]
    n: usize,
    /// Horizon T.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// `constant:<sigma0>` or `expou:<beta>[:<rho>]`.
    #[arg(long, default_value = "constant:1")]
    vol: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Truncation depth M in steps.
    #[arg(long, default_value_t = lss_core::simulate::DEFAULT_TRUNCATION)]
    m: usize,
    /// Subsampling factor k.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Scheme::Auto)]
    scheme: Scheme,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AcfArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value = "expou:5")]
    vol: String,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    #[arg(long, default_value_t = lss_core::simulate::DEFAULT_TRUNCATION)]
    m: usize,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 50)]
    max_lag: usize,
    /// Level of the confidence bands.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum C3Arg {
    Exact,
    Printed,
}

#[derive(Args)]
struct ErrorCurveArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "n-list", value_delimiter = ',')]
    n_list: Vec<usize>,
    /// Evaluation time t; the step is t / N.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Truncation depth in time units.
    #[arg(long = "m-time", default_value_t = 20.0)]
    m_time: f64,
    #[arg(long, value_enum, default_value_t = C3Arg::Exact)]
    c3: C3Arg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestAlphaArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, allow_hyphen_values = true)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McBridgeArgs {
    /// Use Monte Carlo bridge quantiles instead of the closed forms.
    #[arg(long)]
    mc_critvals: bool,
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
    #[arg(long, default_value_t = 2_000)]
    grid: usize,
    /// Seed of the bridge Monte Carlo.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TestVolArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value = "L2")]
    metric: String,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    levels: Vec<f64>,
    #[command(flatten)]
    bridge: McBridgeArgs,
    /// Also write the relative realized variation path as a `t,rrv` CSV.
    #[arg(long)]
    rrv_out: Option<PathBuf>,
    /// Report a pointwise confidence interval for the relative variation at this time.
    #[arg(long)]
    ci_at: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "negbias_alpha")]
    config: Option<PathBuf>,
    /// Run the nested-prefix bias curve at this alpha instead of a config.
    #[arg(long, allow_hyphen_values = true)]
    negbias_alpha: Option<f64>,
    #[arg(long, default_value_t = 4000)]
    n_max: usize,
    /// Replications; overrides the config.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; overrides the config and is required for the bias curve.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for the output CSV (named after experiment and config hash).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CritvalArgs {
    /// Metrics to report (default: all).
    #[arg(long, value_delimiter = ',')]
    metric: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    levels: Vec<f64>,
    /// Scale c of the bridge.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Closed forms (Sup, L2) and the built-in L1 table instead of Monte Carlo.
    #[arg(long)]
    closed_form: bool,
    #[arg(long = "n-mc", default_value_t = 1_000_000)]
    n_mc: usize,
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Data(_) | Error::Length(_) | Error::Io(_) => EXIT_DATA,
            Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::AcfCheck(a) => acf_check(a),
        Command::ErrorCurve(a) => error_curve_cmd(a),
        Command::EstimateAlpha(a) => estimate_alpha(a),
        Command::TestAlpha(a) => test_alpha_cmd(a),
        Command::TestVol(a) => test_vol(a),
        Command::Mc(a) => mc(a),
        Command::Critvals(a) => critvals(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_path(path: &Path) -> Result<SamplePath, Failure> {
    let file = File::open(path).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(read_path_csv(file)?)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let params = GammaKernelParams::new(a.kernel.alpha, a.kernel.lambda)?;
    let vol = VolatilitySpec::parse(&a.vol)?;
    let grid = SimGrid::with_options(a.n, a.t, a.m, a.k)?;
    let seed = RngSeed::new(a.seed, a.stream);
    let exact = match (a.scheme, vol) {
        (Scheme::Exact, VolatilitySpec::Constant { .. }) | (Scheme::Auto, VolatilitySpec::Constant { .. }) => true,
        (Scheme::Exact, _) => return Err(usage("the exact scheme needs constant volatility")),
        _ => false,
    };
    let path = if exact {
        let VolatilitySpec::Constant { sigma0 } = vol else {
            unreachable!()
        };
        simulate_exact_gaussian(&params, sigma0, &grid, seed)?
    } else {
        simulate_convolution(&params, vol, grid, seed)?
    };
    write_path_csv(&path, output(&a.out)?)?;
    Ok(())
}

fn acf_check(a: AcfArgs) -> CliResult {
    let vol = VolatilitySpec::parse(&a.vol)?;
    let mut cfg = ExperimentConfig::new(ExperimentKind::AcfCheck, a.seed, vec![a.kernel.alpha], vec![a.n]);
    cfg.lambda = vec![a.kernel.lambda];
    cfg.horizon = vec![a.t];
    cfg.n_reps = a.reps;
    cfg.max_lag = a.max_lag;
    cfg.levels = vec![a.level];
    cfg.truncation = a.m;
    cfg.simulator = SimulatorChoice::Convolution;
    match vol {
        VolatilitySpec::Constant { .. } => cfg.regime = Regime::Constant,
        VolatilitySpec::ExpOu { beta, leverage_rho } => {
            cfg.beta = vec![beta];
            if leverage_rho == 0.0 {
                cfg.regime = Regime::StochVol;
            } else {
                cfg.regime = Regime::Leverage;
                cfg.rho = vec![leverage_rho];
            }
        }
    }
    let mut rows = Vec::new();
    for &k in &a.k {
        cfg.subsample_factor = Some(k);
        let table = run_experiment_with_workers(&cfg, a.workers.unwrap_or_else(default_workers))?;
        rows.extend_from_slice(table.acf().expect("acf experiment"));
    }
    write_records(&rows, output(&a.out)?)?;
    Ok(())
}

fn error_curve_cmd(a: ErrorCurveArgs) -> CliResult {
    if a.alpha.is_empty() || a.n_list.is_empty() {
        return Err(usage("--alpha and --n-list need at least one value"));
    }
    let form = match a.c3 {
        C3Arg::Exact => C3Form::Exact,
        C3Arg::Printed => C3Form::Printed,
    };
    let mut rows = Vec::new();
    for &alpha in &a.alpha {
        let params = GammaKernelParams::new(alpha, a.lambda)?;
        rows.extend(error_curve_with(
            &params,
            &ProcessMoments::UNIT,
            &a.n_list,
            a.t,
            a.m_time,
            form,
        )?);
    }
    write_error_curve_csv(&rows, output(&a.out)?)?;
    Ok(())
}

fn estimate_alpha(a: EstimateArgs) -> CliResult {
    let path = read_path(&a.input)?;
    write_json(&cof_estimate(&path, a.p)?, output(&a.out)?)?;
    Ok(())
}

fn test_alpha_cmd(a: TestAlphaArgs) -> CliResult {
    let path = read_path(&a.input)?;
    write_json(&test_alpha(&path, a.p, a.alpha0, a.level)?, output(&a.out)?)?;
    Ok(())
}

fn bridge_method(b: &McBridgeArgs) -> Result<CritvalMethod, Failure> {
    if !b.mc_critvals {
        return Ok(CritvalMethod::ClosedForm);
    }
    let seed = b.seed.ok_or_else(|| usage("--mc-critvals needs --seed"))?;
    Ok(CritvalMethod::MonteCarlo {
        config: BridgeMcConfig {
            n_mc: b.n_mc,
            grid: b.grid,
            seed,
        },
        cache_dir: std::env::var_os(CRITVAL_CACHE_ENV).map(PathBuf::from),
    })
}

fn test_vol(a: TestVolArgs) -> CliResult {
    let metric: Metric = a.metric.parse()?;
    let method = bridge_method(&a.bridge)?;
    let path = read_path(&a.input)?;
    let result = vol_test_with(&path, a.p, metric, &a.levels, &method)?;
    if let Some(p) = &a.rrv_out {
        write_rrv_csv(&rrv(&path, a.p)?, BufWriter::new(File::create(p)?))?;
    }
    match a.ci_at {
        Some(t) => {
            let ci = rrv_confidence(&path, a.p, t, a.levels[0])?;
            let both = serde_json::json!({ "test": result, "rrv_interval": ci });
            write_json(&both, output(&a.out)?)?;
        }
        None => write_json(&result, output(&a.out)?)?,
    }
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn mc(a: McArgs) -> CliResult {
    fs::create_dir_all(&a.out_dir)?;
    if let Some(alpha) = a.negbias_alpha {
        let seed = a.seed.ok_or_else(|| usage("the bias curve needs --seed"))?;
        let reps = a.reps.unwrap_or(2000);
        let pool = rayon_pool(a.workers)?;
        let curve = pool.install(|| negbias_curve(alpha, a.n_max, reps, RngSeed::new(seed, 0)))?;
        let file = a
            .out_dir
            .join(format!("negbias_a{alpha}_n{}_r{reps}_s{seed}.csv", a.n_max));
        write_records(&curve, BufWriter::new(File::create(&file)?))?;
        println!("{}", file.display());
        return Ok(());
    }
    let path = a.config.ok_or_else(|| usage("mc needs --config or --negbias-alpha"))?;
    let mut cfg = ExperimentConfig::from_file(&path)?;
    if let Some(r) = a.reps {
        cfg.n_reps = r;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let table = run_experiment_with_workers(&cfg, a.workers)?;
    let file = a.out_dir.join(cfg.output_file_name());
    table.write_csv(BufWriter::new(File::create(&file)?))?;
    println!("{}", file.display());
    Ok(())
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| usage(e.to_string()))
}

fn critvals(a: CritvalArgs) -> CliResult {
    let metrics: Vec<Metric> = if a.metric.is_empty() {
        Metric::ALL.to_vec()
    } else {
        a.metric.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
    };
    if a.c.is_nan() || a.c <= 0.0 {
        return Err(usage("--c must be positive"));
    }
    let rows: Vec<CritvalRow> = if a.closed_form {
        let mut rows = Vec::new();
        for &metric in &metrics {
            for &level in &a.levels {
                rows.push(CritvalRow {
                    metric,
                    c: a.c,
                    level,
                    quantile: unit_quantile_closed_form(metric, level)? * a.c.powi(metric.scale_power()),
                    n_mc: 0,
                    grid: 0,
                    seed: 0,
                });
            }
        }
        rows
    } else {
        let seed = a.seed.ok_or_else(|| usage("Monte Carlo critical values need --seed"))?;
        let cfg = BridgeMcConfig {
            n_mc: a.n_mc,
            grid: a.grid,
            seed,
        };
        let cache = std::env::var_os(CRITVAL_CACHE_ENV).map(PathBuf::from);
        bridge_quantiles_cached(&cfg, &a.levels, cache.as_deref())?
            .into_iter()
            .filter(|r| metrics.contains(&r.metric))
            .map(|mut r| {
                r.quantile *= a.c.powi(r.metric.scale_power());
                r.c = a.c;
                r
            })
            .collect()
    };
    write_records(&rows, output(&a.out)?)?;
    Ok(())
}
