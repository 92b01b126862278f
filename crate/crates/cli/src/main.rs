use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use subdetect::detectors::{t_lin, t_max, t_scan, thresholds, ScanBudget, TestOutcome};
use subdetect::estimators::{default_threshold, frobenius_rate, minimax_rate, risk_estimate, threshold_project, RiskEstimate};
use subdetect::experiment::{phase_diagram, run_reduction_demo, run_sweep, run_verify, DemoConfig, SweepConfig, TestKind, VerifyScale};
use subdetect::format::{MatrixFile, MatrixPayload};
use subdetect::model::{sample_discretized, sample_gaussian};
use subdetect::plantedclique::{load_graph, sample_er, sample_planted, write_edge_list, write_packed};
use subdetect::reduction::{reduce_continuous, DiscreteReducer, QMode, Rounding, WChoice};
use subdetect::{Error, MeanMatrixSpec, ReductionParams, SeededCoins, StreamKey};

const EXIT_BOUND: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "subdetect", version, about = "Submatrix detection experiments and the planted clique reduction")]
struct Cli {
    /// Master seed; overrides the seed in a sweep config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for every file the command writes.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample G(N, 1/2), optionally with a planted clique.
    PcGen(PcGenArgs),
    /// Map a graph on N vertices to a p x p matrix.
    Reduce(ReduceArgs),
    /// Run the linear, scan or max test on a matrix.
    Detect(DetectArgs),
    /// Monte Carlo risk of threshold-and-project.
    Estimate(EstimateArgs),
    /// Phase-diagram sweep from a TOML config.
    Sweep(SweepArgs),
    /// Numerical self-checks; exits 2 if any bound is violated.
    Verify(VerifyArgs),
    /// Planted clique to detection, end to end.
    Demo(DemoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Edges,
    Packed,
}

#[derive(Args)]
struct PcGenArgs {
    #[arg(long)]
    n: usize,
    /// Planted clique size; omit for a pure G(N, 1/2) graph.
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long, value_enum, default_value = "edges")]
    format: GraphFormat,
    #[arg(long, default_value = "graph")]
    name: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    /// Per-atom table when it fits in memory, lazy otherwise.
    Auto,
    Table,
    Cumulative,
    Lazy,
    /// Real-valued rejection samplers, no coin accounting.
    Continuous,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: usize,
    /// Signal level; required unless `--ell` is given.
    #[arg(long)]
    lambda: Option<f64>,
    /// Fix the block count directly and skip the size and resolution checks.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    t: Option<u32>,
    /// `auto`, `minimal` or an integer.
    #[arg(long, default_value = "minimal")]
    w: String,
    #[arg(long, value_enum, default_value = "auto")]
    sampler: Sampler,
    #[arg(long, default_value = "reduced")]
    name: String,
}

#[derive(Args)]
struct DetectArgs {
    /// Matrix file; when absent a matrix is sampled from `--p`, `--k`, `--lambda`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_test)]
    test: TestKind,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    p: Option<usize>,
    /// Sample under the null instead of the planted alternative.
    #[arg(long)]
    null: bool,
    /// Quantize sampled matrices at scale t.
    #[arg(long)]
    t: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = ScanBudget::default().max_subsets)]
    budget: u64,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: usize,
    /// Entry value on the leading k x k block; defaults to sqrt(4 log p).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Schatten index of the loss; `inf` for the spectral norm.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Full Monte Carlo sizes instead of the quick defaults.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 80)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.08)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long)]
    t: Option<u32>,
    #[arg(long, default_value = "minimal")]
    w: String,
}

fn parse_test(s: &str) -> Result<TestKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_w(s: &str) -> anyhow::Result<WChoice> {
    Ok(match s {
        "auto" => WChoice::Auto,
        "minimal" => WChoice::Minimal,
        n => WChoice::Fixed(n.parse().with_context(|| format!("w must be auto, minimal or an integer, got '{n}'"))?),
    })
}

fn write_file(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn pc_gen(cli: &Cli, a: &PcGenArgs) -> anyhow::Result<u8> {
    let key = StreamKey::new(cli.seed.unwrap_or(0));
    let g = match a.kappa {
        Some(kappa) => sample_planted(a.n, kappa, key)?,
        None => sample_er(a.n, key),
    };
    let mut buf = Vec::new();
    let ext = match a.format {
        GraphFormat::Edges => {
            write_edge_list(&g, &mut buf)?;
            "edges"
        }
        GraphFormat::Packed => {
            write_packed(&g, &mut buf)?;
            "pcgr"
        }
    };
    let path = write_file(&cli.out_dir, &format!("{}.{ext}", a.name), buf)?;
    println!("wrote {} (n = {}, edges = {}, planted = {})", path.display(), g.n(), g.edge_count(), g.planted().map_or(0, |v| v.len()));
    Ok(0)
}

#[derive(Serialize)]
struct ReduceSummary<'a> {
    params: &'a ReductionParams,
    sampler: &'static str,
    ledger: Option<subdetect::CoinLedger>,
    output: String,
}

fn reduce(cli: &Cli, a: &ReduceArgs) -> anyhow::Result<u8> {
    let w = parse_w(&a.w)?;
    let params = match (a.ell, a.lambda) {
        (Some(ell), _) => {
            let t = a.t.unwrap_or_else(|| subdetect::reduction::params::default_t(a.p));
            let w = match w {
                WChoice::Fixed(w) => w,
                WChoice::Minimal => subdetect::reduction::params::minimal_w(t, 2 * a.p * ell),
                WChoice::Auto => subdetect::reduction::params::default_w(a.p),
            };
            ReductionParams::desk(a.p, a.k, ell, t, w)?
        }
        (None, Some(lambda)) => ReductionParams::choose(a.p, a.k, lambda, a.t, w)?,
        (None, None) => bail!("either --lambda or --ell is required"),
    };
    let g = load_graph(&a.graph)?;
    let seed = cli.seed.unwrap_or(0);
    let (payload, ledger, sampler) = match a.sampler {
        Sampler::Continuous => (MatrixPayload::Real(reduce_continuous(&g, &params, StreamKey::new(seed))?), None, "continuous"),
        s => {
            let (reducer, label) = match s {
                Sampler::Table => (DiscreteReducer::new(&params, QMode::Table(Rounding::PerAtom))?, "table"),
                Sampler::Cumulative => (DiscreteReducer::new(&params, QMode::Table(Rounding::Cumulative))?, "cumulative"),
                Sampler::Lazy => (DiscreteReducer::new(&params, QMode::Lazy)?, "lazy"),
                _ => (DiscreteReducer::auto(&params)?, "auto"),
            };
            let (x, ledger) = reducer.reduce(&g, &SeededCoins::new(seed), 0)?;
            (MatrixPayload::Dyadic(x), Some(ledger), label)
        }
    };
    let mut bytes = Vec::new();
    MatrixFile { seed, payload }.write_to(&mut bytes)?;
    let path = write_file(&cli.out_dir, &format!("{}.sdmx", a.name), bytes)?;
    let summary = ReduceSummary { params: &params, sampler, ledger, output: path.display().to_string() };
    write_file(&cli.out_dir, &format!("{}.json", a.name), json(&summary))?;
    print!("{}", json(&summary));
    Ok(0)
}

fn detect(cli: &Cli, a: &DetectArgs) -> anyhow::Result<u8> {
    let x = match (&a.input, a.p) {
        (Some(path), _) => MatrixFile::load(path)?.payload.to_real(),
        (None, Some(p)) => {
            let theta = if a.null { MeanMatrixSpec::zero(p) } else { MeanMatrixSpec::leading_block(p, a.k, a.lambda)? };
            let key = StreamKey::new(cli.seed.unwrap_or(0));
            match a.t {
                Some(t) => sample_discretized(&theta, t, key)?.to_real(),
                None => sample_gaussian(&theta, key),
            }
        }
        (None, None) => bail!("either --input or --p is required"),
    };
    let p = x.dim();
    if a.k == 0 || a.k > p {
        bail!("k = {} must lie in 1..={p}", a.k);
    }
    let th = thresholds(p, a.k, a.lambda, a.c);
    let outcome = match a.test {
        TestKind::Lin => TestOutcome::new(t_lin(&x), th.lin),
        TestKind::Max => TestOutcome::new(t_max(&x), th.max),
        TestKind::Scan => TestOutcome::new(t_scan(&x, a.k, ScanBudget { max_subsets: a.budget })?.statistic, th.scan),
    };
    write_file(&cli.out_dir, "detect.json", json(&outcome))?;
    print!("{}", json(&outcome));
    Ok(0)
}

#[derive(Serialize)]
struct EstimateSummary {
    p: usize,
    k: usize,
    lambda: f64,
    q: f64,
    threshold: f64,
    risk: RiskEstimate,
    rate: f64,
    ratio: f64,
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> anyhow::Result<u8> {
    let level = default_threshold(a.p);
    let lambda = a.lambda.unwrap_or(level);
    let theta = MeanMatrixSpec::leading_block(a.p, a.k, lambda)?;
    let risk = risk_estimate(|x| threshold_project(x, a.k, level), &theta, a.q, a.trials, cli.seed.unwrap_or(0))?;
    let rate = if a.q == 2.0 { frobenius_rate(a.p, a.k) } else { minimax_rate(a.p, a.k, a.q) };
    let s = EstimateSummary { p: a.p, k: a.k, lambda, q: a.q, threshold: level, risk, rate, ratio: risk.mean / rate };
    write_file(&cli.out_dir, "estimate.json", json(&s))?;
    print!("{}", json(&s));
    Ok(0)
}

fn sweep(cli: &Cli, a: &SweepArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg: SweepConfig = toml::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let (report, timings) = run_sweep(&cfg)?;
    write_file(&cli.out_dir, "sweep.json", report.to_json() + "\n")?;
    write_file(&cli.out_dir, "sweep.csv", report.to_csv())?;
    write_file(&cli.out_dir, "phase.svg", phase_diagram(&report))?;
    write_file(&cli.out_dir, "timings.json", json(&timings))?;
    print!("{}", report.to_csv());
    Ok(0)
}

fn verify(cli: &Cli, a: &VerifyArgs) -> anyhow::Result<u8> {
    let scale = if a.full { VerifyScale::Full } else { VerifyScale::Quick };
    let report = run_verify(scale, cli.seed.unwrap_or(0))?;
    write_file(&cli.out_dir, "verify.json", report.to_json() + "\n")?;
    for c in &report.checks {
        println!("{} {}: {:.4e} vs {:.4e} ({})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.observed, c.limit, c.detail);
    }
    Ok(if report.passed() { 0 } else { EXIT_BOUND })
}

fn demo(cli: &Cli, a: &DemoArgs) -> anyhow::Result<u8> {
    let mut cfg = DemoConfig::new(a.p, a.k, a.lambda, a.trials, cli.seed.unwrap_or(0));
    cfg.t = a.t;
    cfg.w = parse_w(&a.w)?;
    let report = run_reduction_demo(&cfg)?;
    write_file(&cli.out_dir, "demo.json", report.to_json() + "\n")?;
    print!("{}", report.to_json());
    println!();
    Ok(0)
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::PcGen(a) => pc_gen(cli, a),
        Command::Reduce(a) => reduce(cli, a),
        Command::Detect(a) => detect(cli, a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Demo(a) => demo(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::BudgetExceeded { .. }) => ExitCode::from(EXIT_BUDGET),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
