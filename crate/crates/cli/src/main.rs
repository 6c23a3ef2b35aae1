//! Command-line front end: estimate covariance surfaces from curve CSVs,
//! select bandwidths by cross-validation, simulate the reference processes,
//! and run the Monte Carlo studies. Every command is a pure function of its
//! input files, flags, and --seed; rerunning with the same seed writes
//! byte-identical outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use covkernel::cv::{kfold_cv, CvPlan};
use covkernel::estimator::{correlation_surface, estimate, std_curve, DEFAULT_SD_FLOOR};
use covkernel::experiments::{
    bandwidth_sweep, clt_check, cv_report_rows, decomposition_study, estimator_comparison, rate_table,
};
use covkernel::grid::{DesignGrid, TriangleGrid};
use covkernel::io::{
    read_samples, write_report, write_samples, write_std_curve, write_surface, GridPolicy,
};
use covkernel::kernels::{KernelKind, PolyOrder};
use covkernel::rng::RngSpec;
use covkernel::sim::{add_noise, ProcessSpec};
use covkernel::weights::{PairDomain, SmootherConfig};

#[derive(Parser)]
#[command(
    name = "covkernel",
    version,
    about = "Covariance kernel estimation for synchronously observed noisy curves",
    long_about = "Estimates the covariance kernel of a stochastic process from n noisy curves \
                  observed at p shared design points, by local-polynomial smoothing of the \
                  empirical covariances restricted to the upper triangle x <= y. Also ships \
                  bandwidth cross-validation, process simulators, and Monte Carlo studies."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the covariance surface from a curves CSV
    Estimate(EstimateArgs),
    /// Select a bandwidth by K-fold sup-norm cross-validation
    Cv(CvArgs),
    /// Simulate noisy curves from a reference process
    Simulate(SimulateArgs),
    /// Monte Carlo study of the error-decomposition term sizes
    Decompose(DecomposeArgs),
    /// Oracle-bandwidth error rates over several (n, p) sizes
    Rates(RatesArgs),
    /// Sup-norm error sweep over a bandwidth grid
    Sweep(SweepArgs),
    /// Compare the restricted (triangle) and off-diagonal estimators
    Compare(CompareArgs),
    /// Empirical check of the limiting variance at fixed points
    Clt(CltArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Uniform,
    Epanechnikov,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Uniform => KernelKind::Uniform,
            KernelArg::Epanechnikov => KernelKind::EpanechnikovProduct,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    /// Pairs j < k only; never smooths across the diagonal
    Triangle,
    /// All pairs j ≠ k; smooths across the diagonal
    Offdiag,
}

impl From<DomainArg> for PairDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Triangle => PairDomain::UpperTriangle,
            DomainArg::Offdiag => PairDomain::OffDiagonal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessArg {
    /// Ornstein–Uhlenbeck-type process (uses --theta and --sigma)
    Ou,
    /// Smooth rank-2 process (no parameters)
    Twoterm,
    /// Brownian motion (uses --sigma)
    Bm,
}

#[derive(Args, Clone, Copy)]
struct ProcessFlags {
    #[arg(long, value_enum)]
    process: ProcessArg,
    /// Mean-reversion rate θ > 0 (ou only)
    #[arg(long, default_value_t = 3.0)]
    theta: f64,
    /// Diffusion scale σ ≥ 0 (ou and bm)
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
}

impl ProcessFlags {
    fn spec(&self) -> ProcessSpec {
        match self.process {
            ProcessArg::Ou => ProcessSpec::Ou { theta: self.theta, sigma: self.sigma },
            ProcessArg::Twoterm => ProcessSpec::TwoTerm,
            ProcessArg::Bm => ProcessSpec::BrownianMotion { sigma: self.sigma },
        }
    }
}

fn parse_grid_policy(s: &str) -> Result<GridPolicy, String> {
    Ok(match s {
        "header" => GridPolicy::Header,
        "equidistant" => GridPolicy::Equidistant,
        other => GridPolicy::GridFile(PathBuf::from(other)),
    })
}

/// Bandwidth grid "A:B:STEP" (inclusive of B) or a single value.
#[derive(Clone)]
struct HGrid(Vec<f64>);

fn parse_h_grid(s: &str) -> Result<HGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    match parts.as_slice() {
        [one] => Ok(HGrid(vec![num(one)?])),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || !(a > 0.0) || a > b || b > 1.0 {
                return Err(format!("need 0 < A <= B <= 1 and STEP > 0, got {a}:{b}:{step}"));
            }
            let mut grid = Vec::new();
            let mut l = 0u32;
            loop {
                let mut h = a + f64::from(l) * step;
                // snap accumulated rounding onto the endpoint
                if (h - b).abs() <= step * 1e-9 {
                    h = b;
                }
                if h > b {
                    break;
                }
                grid.push(h);
                l += 1;
            }
            Ok(HGrid(grid))
        }
        _ => Err(format!("expected A:B:STEP or a single value, got {s:?}")),
    }
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    Ok((parse(x)?, parse(y)?))
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (n, p) = s.split_once(',').ok_or_else(|| format!("expected N,P, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not an integer: {t:?}"));
    Ok((parse(n)?, parse(p)?))
}

#[derive(Args)]
struct EstimateArgs {
    /// Curves CSV: rows are curves, one column per design point
    #[arg(long)]
    input: PathBuf,
    /// Polynomial order m of the local fit
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Bandwidth h in (0, 1]
    #[arg(long)]
    bandwidth: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value_t = DomainArg::Triangle)]
    domain: DomainArg,
    /// Design grid source: "header", "equidistant", or a grid file path
    #[arg(long, default_value = "header", value_parser = parse_grid_policy)]
    grid: GridPolicy,
    /// Output surface CSV ("x,y,value"); empty windows are written as NA
    #[arg(long)]
    out: PathBuf,
    /// Also write the standard-deviation curve sd(x) = sqrt(estimate(x,x))
    #[arg(long)]
    std_out: Option<PathBuf>,
    /// Also write the correlation surface
    #[arg(long)]
    corr_out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    /// Curves CSV: rows are curves, one column per design point
    #[arg(long)]
    input: PathBuf,
    /// Number of folds K
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Candidate bandwidths "A:B:STEP" or a single value
    #[arg(long, value_parser = parse_h_grid)]
    h_grid: HGrid,
    /// Polynomial order m of the local fit
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Seed for the fold assignment
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Design grid source: "header", "equidistant", or a grid file path
    #[arg(long, default_value = "header", value_parser = parse_grid_policy)]
    grid: GridPolicy,
    /// Output report CSV with per-fold and mean scores
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    process: ProcessFlags,
    /// Observation noise standard deviation σ_ε ≥ 0
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Number of curves
    #[arg(long)]
    n: usize,
    /// Number of equidistant design points (j − 1/2)/p
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output curves CSV with the design points as the header row
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    process: ProcessFlags,
    #[arg(long, default_value_t = 0.75)]
    noise_sd: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    bandwidth: f64,
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Monte Carlo replications
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    process: ProcessFlags,
    #[arg(long, default_value_t = 0.75)]
    noise_sd: f64,
    /// Sample size as "N,P"; repeat the flag for several sizes
    #[arg(long = "size", required = true)]
    #[arg(value_parser = parse_size)]
    sizes: Vec<(usize, usize)>,
    #[arg(long, default_value = "0.05:1.0:0.05", value_parser = parse_h_grid)]
    h_grid: HGrid,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    process: ProcessFlags,
    #[arg(long, default_value_t = 0.75)]
    noise_sd: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value = "0.05:1.0:0.05", value_parser = parse_h_grid)]
    h_grid: HGrid,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 0.75)]
    noise_sd: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Polynomial order; repeat the flag for several orders
    #[arg(long = "order", default_values_t = [1])]
    orders: Vec<usize>,
    #[arg(long, default_value = "0.05:1.0:0.05", value_parser = parse_h_grid)]
    h_grid: HGrid,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CltArgs {
    #[command(flatten)]
    process: ProcessFlags,
    #[arg(long, default_value_t = 0.75)]
    noise_sd: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.1)]
    bandwidth: f64,
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Evaluation point as "X,Y"; repeat the flag for several points
    /// (defaults to 0.25,0.75 and 0.5,0.9)
    #[arg(long = "point", value_parser = parse_point)]
    points: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run_estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let (samples, grid) = read_samples(&a.input, &a.grid)?;
    let cfg = SmootherConfig::new(PolyOrder::new(a.order), a.bandwidth, a.kernel.into(), a.domain.into())?;
    let evals = TriangleGrid::design_pairs(&grid);
    let surface = estimate(&samples, &grid, &cfg, &evals)?;
    write_surface(&a.out, &surface)?;
    if let Some(path) = &a.std_out {
        write_std_curve(path, &std_curve(&surface)?)?;
    }
    if let Some(path) = &a.corr_out {
        write_surface(path, &correlation_surface(&surface, DEFAULT_SD_FLOOR)?)?;
    }
    Ok(())
}

fn run_cv(a: CvArgs) -> anyhow::Result<()> {
    let (samples, grid) = read_samples(&a.input, &a.grid)?;
    let order = PolyOrder::new(a.order);
    let base = SmootherConfig::new(
        order,
        a.h_grid.0[0],
        KernelKind::EpanechnikovProduct,
        PairDomain::UpperTriangle,
    )?;
    let plan = CvPlan::new(a.folds, a.h_grid.0.clone(), a.seed)?;
    let report = kfold_cv(&samples, &grid, &base, &plan)?;
    write_report(&a.out, &cv_report_rows(&report, samples.n(), samples.p(), order))?;
    println!("selected bandwidth h = {}", report.chosen_h);
    Ok(())
}

fn run_simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let grid = DesignGrid::equidistant(a.p)?;
    let rng = RngSpec::new(a.seed);
    let clean = a.process.spec().simulate(a.n, &grid, rng)?;
    let noisy = add_noise(&clean, a.noise_sd, rng)?;
    write_samples(&a.out, &noisy, Some(&grid))?;
    Ok(())
}

fn run_decompose(a: DecomposeArgs) -> anyhow::Result<()> {
    let cfg = SmootherConfig::new(
        PolyOrder::new(a.order),
        a.bandwidth,
        KernelKind::EpanechnikovProduct,
        PairDomain::UpperTriangle,
    )?;
    let report =
        decomposition_study(&a.process.spec(), a.n, a.p, a.noise_sd, &cfg, a.reps, RngSpec::new(a.seed))?;
    write_report(&a.out, &report)?;
    Ok(())
}

fn run_rates(a: RatesArgs) -> anyhow::Result<()> {
    let report = rate_table(
        &a.process.spec(),
        &a.sizes,
        a.noise_sd,
        PolyOrder::new(a.order),
        &a.h_grid.0,
        a.reps,
        RngSpec::new(a.seed),
    )?;
    write_report(&a.out, &report)?;
    Ok(())
}

fn run_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let report = bandwidth_sweep(
        &a.process.spec(),
        a.n,
        a.p,
        a.noise_sd,
        PolyOrder::new(a.order),
        &a.h_grid.0,
        a.reps,
        RngSpec::new(a.seed),
    )?;
    write_report(&a.out, &report)?;
    Ok(())
}

fn run_compare(a: CompareArgs) -> anyhow::Result<()> {
    let orders: Vec<PolyOrder> = a.orders.iter().map(|&m| PolyOrder::new(m)).collect();
    let report =
        estimator_comparison(a.n, a.p, a.noise_sd, &orders, &a.h_grid.0, a.reps, RngSpec::new(a.seed))?;
    write_report(&a.out, &report)?;
    Ok(())
}

fn run_clt(a: CltArgs) -> anyhow::Result<()> {
    let points = if a.points.is_empty() { vec![(0.25, 0.75), (0.5, 0.9)] } else { a.points.clone() };
    let report = clt_check(
        &a.process.spec(),
        a.noise_sd,
        a.n,
        a.p,
        a.bandwidth,
        PolyOrder::new(a.order),
        &points,
        a.reps,
        RngSpec::new(a.seed),
    )?;
    write_report(&a.out, &report)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Estimate(a) => run_estimate(a).context("estimate failed"),
        Command::Cv(a) => run_cv(a).context("cv failed"),
        Command::Simulate(a) => run_simulate(a).context("simulate failed"),
        Command::Decompose(a) => run_decompose(a).context("decompose failed"),
        Command::Rates(a) => run_rates(a).context("rates failed"),
        Command::Sweep(a) => run_sweep(a).context("sweep failed"),
        Command::Compare(a) => run_compare(a).context("compare failed"),
        Command::Clt(a) => run_clt(a).context("clt failed"),
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors; runtime failures exit 1
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
