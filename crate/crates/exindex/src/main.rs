use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exindex::config::{ExperimentConfig, GridSpec, MeasureSpec};
use exindex::error::{AppError, AppResult};
use exindex::format::num;
use exindex::harness;
use exindex::io;
use exindex::model_arg::parse_model;
use exindex_core::biascorrect::{check_conditions, corrected_curve, default_probe};
use exindex_core::clusterproc::{estimate_kernel_mc, tail_chain_probabilities, CovarianceKernel};
use exindex_core::estimate::{
    blocks_empirical, blocks_fixed, blocks_true_quantile, exceedance_count, runs_estimator,
    runs_sweep, sweep, sweep_true_quantile, EstimatorConfig, TiePolicy,
};
use exindex_core::oracle::{bias_expansion_mm, bias_expansion_wn, theta_nt_mm_exact, theta_nt_wn};
use exindex_core::sim::{generate_stream, MovingMaxima};

/// Extremal index estimation over a continuum of thresholds.
#[derive(Parser)]
#[command(name = "exindex", version = exindex::VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series, one value per line.
    Simulate(SimulateArgs),
    /// Blocks estimator at one threshold.
    Blocks(BlocksArgs),
    /// Runs estimator at one threshold.
    Runs(RunsArgs),
    /// Blocks (or runs) estimator over a grid of thresholds.
    Sweep(SweepArgs),
    /// Bias-corrected blocks estimator over a grid of thresholds.
    Correct(CorrectArgs),
    /// Check a signed measure for the cancellation conditions.
    CheckMeasure(CheckMeasureArgs),
    /// Closed-form finite-sample extremal index and its bias expansion.
    Oracle(OracleArgs),
    /// Covariance kernel of the cluster process.
    Kernel(KernelArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Mc(McArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// ar1:PHI | wn:PSI[:INNOV] | iid[:INNOV] | mm:COEFFS:B1:B2:C1:C2 | JSON
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Substream (replicate index) of the seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ties {
    Reject,
    Ratio,
}

impl From<Ties> for TiePolicy {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Reject => TiePolicy::Reject,
            Ties::Ratio => TiePolicy::RatioForm,
        }
    }
}

#[derive(Args)]
struct BlocksArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    r: usize,
    /// Fixed threshold; otherwise the threshold comes from --k and --t.
    #[arg(long, conflicts_with_all = ["k", "t"])]
    u: Option<f64>,
    #[arg(long, required_unless_present = "u")]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Use the true quantile F^←(1 - vt) of this model instead of the order statistic.
    #[arg(long, requires = "k")]
    true_quantile: Option<String>,
    #[arg(long, value_enum, default_value_t = Ties::Reject)]
    ties: Ties,
}

#[derive(Args)]
struct RunsArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    run_length: usize,
    #[arg(long, conflicts_with_all = ["k", "t"])]
    u: Option<f64>,
    #[arg(long, required_unless_present = "u")]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    /// Point count, comma-separated t values, or `order`.
    #[arg(long, default_value = "order")]
    grid: String,
    /// Sweep the runs estimator with this run length instead.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    true_quantile: Option<String>,
    #[arg(long, value_enum, default_value_t = Ties::Reject)]
    ties: Ties,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "mu", required = true, multiple = false)]
struct MeasureArgs {
    /// CSV `s,t,w` with header.
    #[arg(long, group = "mu")]
    measure: Option<PathBuf>,
    /// p,q,a
    #[arg(long, group = "mu", value_delimiter = ',')]
    two_atom: Option<Vec<f64>>,
    /// kappa,a,b,m
    #[arg(long, group = "mu", value_delimiter = ',')]
    product: Option<Vec<f64>>,
}

impl MeasureArgs {
    fn spec(&self) -> AppResult<MeasureSpec> {
        if let Some(path) = &self.measure {
            return Ok(MeasureSpec::File { path: path.clone() });
        }
        if let Some(v) = &self.two_atom {
            if v.len() != 3 {
                return Err(AppError::Config("two-atom: expected p,q,a".into()));
            }
            return Ok(MeasureSpec::TwoAtom {
                p: v[0],
                q: v[1],
                a: v[2],
            });
        }
        if let Some(v) = &self.product {
            if v.len() != 4 {
                return Err(AppError::Config("product: expected kappa,a,b,m".into()));
            }
            if v[3] < 0.0 || v[3].fract() != 0.0 {
                return Err(AppError::Config(
                    "product: m must be a nonnegative integer".into(),
                ));
            }
            return Ok(MeasureSpec::Product {
                kappa: v[0],
                a: v[1],
                b: v[2],
                m: v[3] as usize,
            });
        }
        Err(AppError::Config("no measure given".into()))
    }
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value = "50")]
    grid: String,
    #[arg(long, value_enum, default_value_t = Ties::Reject)]
    ties: Ties,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckMeasureArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleModel {
    Wn,
    Iid,
    Mm,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    model: OracleModel,
    #[arg(long, default_value_t = 0.0)]
    psi: f64,
    #[arg(long, value_delimiter = ',')]
    coeffs: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    beta1: f64,
    #[arg(long, default_value_t = 1.0)]
    beta2: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 0.5)]
    c2: f64,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    v: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelMethod {
    Mc,
    TailChain,
    Iid,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value_t = KernelMethod::Mc)]
    method: KernelMethod,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Point count or comma-separated t values.
    #[arg(long, default_value = "10")]
    grid: String,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Tail-chain truncation K.
    #[arg(long, default_value_t = 50)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `base_seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write mean curves per estimator family (curves_*.csv).
    #[arg(long)]
    curves: bool,
    /// Normality report at these t values.
    #[arg(long, value_delimiter = ',')]
    normality: Vec<f64>,
}

fn series(path: &std::path::Path) -> AppResult<Vec<f64>> {
    Ok(io::read_series(path)?.values)
}

fn print_value(v: f64) -> AppResult<()> {
    println!("{}", num(v));
    Ok(())
}

fn simulate(a: SimulateArgs) -> AppResult<()> {
    let model = parse_model(&a.model)?;
    let s = generate_stream(&model, a.n, a.seed, a.stream, a.burn_in)?;
    io::write_series(io::output(a.out.as_deref())?, &s.values).map_err(|e| AppError::io("<out>", e))
}

fn blocks(a: BlocksArgs) -> AppResult<()> {
    let x = series(&a.series)?;
    if let Some(u) = a.u {
        return print_value(blocks_fixed(&x, a.r, u)?);
    }
    let cfg = EstimatorConfig::new(a.r, a.k.expect("required by clap")).with_ties(a.ties.into());
    match a.true_quantile {
        Some(spec) => {
            let model = parse_model(&spec)?;
            print_value(blocks_true_quantile(&x, &cfg, a.t, |p| {
                model.marginal_quantile(p)
            })?)
        }
        None => print_value(blocks_empirical(&x, &cfg, a.t)?),
    }
}

fn runs(a: RunsArgs) -> AppResult<()> {
    let x = series(&a.series)?;
    if let Some(u) = a.u {
        return print_value(runs_estimator(&x, a.run_length, u)?);
    }
    let k = a.k.expect("required by clap");
    let grid = exindex_core::estimate::grid_from_ts(k, &[a.t])?;
    let entry = runs_sweep(&x, a.run_length, k, &grid)?.remove(0);
    debug_assert_eq!(entry.k_t, exceedance_count(k, a.t)?);
    print_value(entry.estimate?)
}

fn sweep_cmd(a: SweepArgs) -> AppResult<()> {
    let x = series(&a.series)?;
    let grid = GridSpec::parse(&a.grid)?.resolve(a.k)?;
    let out = io::output(a.out.as_deref())?;
    if let Some(rl) = a.runs {
        return io::write_curve_entries(out, &runs_sweep(&x, rl, a.k, &grid)?, "runs");
    }
    let cfg = EstimatorConfig::new(a.r, a.k).with_ties(a.ties.into());
    let curve = match a.true_quantile {
        Some(spec) => {
            let model = parse_model(&spec)?;
            sweep_true_quantile(&x, &cfg, &grid, |p| model.marginal_quantile(p))?
        }
        None => sweep(&x, &cfg, &grid)?,
    };
    io::write_curve(out, &curve)
}

fn correct(a: CorrectArgs) -> AppResult<()> {
    let x = series(&a.series)?;
    let mu = a.measure.spec()?.build()?;
    check_conditions(&mu, &default_probe(a.delta)).into_result()?;
    let cfg = EstimatorConfig::new(a.r, a.k).with_ties(a.ties.into());
    let grid = GridSpec::parse(&a.grid)?.resolve(a.k)?;
    io::write_curve(
        io::output(a.out.as_deref())?,
        &corrected_curve(&x, &cfg, &mu, &grid)?,
    )
}

fn check_measure(a: CheckMeasureArgs) -> AppResult<()> {
    let mu = io::read_measure(&a.input)?;
    let report = check_conditions(&mu, &default_probe(a.delta));
    println!("atoms\t{}", mu.len());
    println!("total_weight\t{}", num(mu.total_weight()));
    println!("m1_residual\t{}", num(report.m1_residual));
    for (d, m) in &report.m2_moments {
        println!("m2_moment[{}]\t{}", num(*d), num(*m));
    }
    println!("m3_integral\t{}", num(report.m3_integral));
    for v in &report.violations {
        println!("violation\t{}", v.code());
    }
    report.into_result()?;
    println!("ok");
    Ok(())
}

fn oracle(a: OracleArgs) -> AppResult<()> {
    let (theta_nt, expansions) = match a.model {
        OracleModel::Wn => (
            theta_nt_wn(a.psi, a.r, a.v, a.t)?,
            vec![("", bias_expansion_wn(a.psi, a.r, a.v)?)],
        ),
        OracleModel::Iid => (
            theta_nt_wn(0.0, a.r, a.v, a.t)?,
            vec![("", bias_expansion_wn(0.0, a.r, a.v)?)],
        ),
        OracleModel::Mm => {
            let coeffs = if a.coeffs.is_empty() {
                vec![1.0]
            } else {
                a.coeffs.clone()
            };
            let mm = MovingMaxima::new(coeffs, a.beta1, a.beta2, a.c1, a.c2)?;
            let (power, linear) = bias_expansion_mm(&mm, a.r, a.v)?;
            (
                theta_nt_mm_exact(&mm, a.r, a.v, a.t)?,
                vec![("power.", power), ("linear.", linear)],
            )
        }
    };
    let mut out = std::io::stdout().lock();
    let w = |out: &mut std::io::StdoutLock, k: &str, v: f64| writeln!(out, "{k}\t{}", num(v));
    let io_err = |e| AppError::io("<stdout>", e);
    w(&mut out, "theta_nt", theta_nt).map_err(io_err)?;
    for (prefix, b) in expansions {
        w(&mut out, &format!("{prefix}theta"), b.theta).map_err(io_err)?;
        w(&mut out, &format!("{prefix}theta_n"), b.theta_n).map_err(io_err)?;
        w(&mut out, &format!("{prefix}c_n"), b.c_n).map_err(io_err)?;
        w(&mut out, &format!("{prefix}delta"), b.delta).map_err(io_err)?;
    }
    Ok(())
}

fn kernel(a: KernelArgs) -> AppResult<()> {
    let model = parse_model(&a.model)?;
    let ts: Vec<f64> = match GridSpec::parse(&a.grid)? {
        GridSpec::Points(p) if p > 0 => (1..=p).map(|j| j as f64 / p as f64).collect(),
        GridSpec::List(ts) => ts,
        _ => {
            return Err(AppError::Config(
                "kernel grid: give a point count or t values".into(),
            ))
        }
    };
    let cfg = EstimatorConfig::new(a.r, a.k);
    let grid_kernel = match a.method {
        KernelMethod::Mc => estimate_kernel_mc(&model, &cfg, a.n, &ts, a.reps, a.seed)?,
        KernelMethod::TailChain => tail_chain_probabilities(
            &model,
            a.n,
            a.k as f64 / a.n as f64,
            a.window,
            a.reps,
            a.seed,
        )?
        .to_grid(&ts),
        KernelMethod::Iid => {
            let k = CovarianceKernel::ClosedFormIid;
            let p = ts.len();
            let table = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
                (0..p * p).map(|i| f(ts[i / p], ts[i % p])).collect()
            };
            exindex_core::clusterproc::GridKernel {
                grid: ts.clone(),
                c: table(&|s, t| k.c(s, t)),
                c_g: table(&|s, t| k.c_g(s, t)),
                c_fg: table(&|s, t| k.c_fg(s, t)),
                theta: 1.0,
                replicates: 0,
            }
        }
    };
    io::write_kernel(io::output(a.out.as_deref())?, &grid_kernel)
}

fn mc(a: McArgs) -> AppResult<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.base_seed = seed;
    }
    let dir = a.out.or_else(|| cfg.outputs.clone()).ok_or_else(|| {
        AppError::Config("no output directory: pass --out or set `outputs`".into())
    })?;
    let (result, bundle) = harness::curve_bundle(&cfg)?;
    let mut written = harness::write_result(&result, &dir)?;
    if a.curves {
        written.extend(harness::write_curve_bundle(&bundle, &dir)?);
    }
    if !a.normality.is_empty() {
        let report = harness::normality_check(&cfg, &a.normality)?;
        let path = dir.join("normality.json");
        let mut out = io::create(&path)?;
        serde_json::to_writer_pretty(&mut out, &report)
            .map_err(|e| AppError::Config(e.to_string()))?;
        out.flush().map_err(|e| AppError::io(&path, e))?;
        written.push(path);
    }
    for p in written {
        println!("{}", p.display());
    }
    if result.flagged_total() > 0 {
        eprintln!(
            "note: {} curve points flagged and excluded from means",
            result.flagged_total()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Blocks(a) => blocks(a),
        Command::Runs(a) => runs(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Correct(a) => correct(a),
        Command::CheckMeasure(a) => check_measure(a),
        Command::Oracle(a) => oracle(a),
        Command::Kernel(a) => kernel(a),
        Command::Mc(a) => mc(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
