//! Command-line surface for the chores-eq solver: generate instances,
//! solve them with either algorithm, certify the result, and sweep
//! directories of instances into benchmark CSVs.
//!
//! Exit codes: 0 success, 1 solve failure or runtime error, 2 usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chores_eq::certify::Certificate;
use chores_eq::epm::{epm_run, EpmConfig};
use chores_eq::gfw::{self, GfwConfig};
use chores_eq::instances::{
    generate, parse_bidding_csv, subsample_bidding, BidSpec, Dist, GenSpec,
};
use chores_eq::{certify_ce, ChoresInstance};

/// Exactness threshold on every certificate component.
const EXACT_TOL: f64 = 1e-6;
/// Default earning relaxation for the strongly-approximate test.
const DEFAULT_APPROX_EPS: f64 = 1e-2;

#[derive(Parser)]
#[command(
    name = "chores-eq",
    version,
    about = "Competitive-equilibrium solver for chore markets",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files: seeded random suites, built-in fixtures,
    /// or subsamples of a bidding CSV
    Gen(GenArgs),
    /// Solve one instance; write candidate, certificate, and trace files
    Solve(SolveArgs),
    /// Solve every instance in a directory and write benchmark CSVs
    Bench(BenchArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Gfw,
    Epm,
}

impl AlgoArg {
    fn name(self) -> &'static str {
        match self {
            AlgoArg::Gfw => "gfw",
            AlgoArg::Epm => "epm",
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum DistArg {
    Uniform01,
    Lognormal,
    Truncnormal,
    Exponential,
    Randint,
}

impl From<DistArg> for Dist {
    fn from(d: DistArg) -> Dist {
        match d {
            DistArg::Uniform01 => Dist::Uniform01,
            DistArg::Lognormal => Dist::Lognormal,
            DistArg::Truncnormal => Dist::Truncnormal,
            DistArg::Exponential => Dist::Exponential,
            DistArg::Randint => Dist::Randint,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum FixtureArg {
    /// Two agents, one chore: unique equilibrium with price 2
    SingleChore,
    /// Two agents, eight seeded uniform chores
    Wide,
    /// Two agents, two chores with disutility ratio `--ratio`, where
    /// approximate and exact equilibria have far-apart prices
    ExtremeRatio,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["dist", "fixture", "bidding"]))]
struct GenArgs {
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Random-suite distribution (square n-by-n instances)
    #[arg(long, value_enum)]
    dist: Option<DistArg>,
    /// Built-in fixture
    #[arg(long, value_enum)]
    fixture: Option<FixtureArg>,
    /// Bidding CSV (rows = members, columns = papers, ordinal labels) to
    /// subsample into an n-by-n instance
    #[arg(long)]
    bidding: Option<PathBuf>,
    /// Instance size
    #[arg(long)]
    n: Option<usize>,
    /// Number of instances to generate (seeds seed..seed+count-1)
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Base RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disutility ratio for the extreme-ratio fixture
    #[arg(long, default_value_t = 100.0)]
    ratio: f64,
    /// Perturbation of the second agent for the extreme-ratio fixture
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Gaussian noise standard deviation for bidding disutilities
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgoArg::Gfw)]
    algo: AlgoArg,
    /// Accept (and report the first iterate reaching) a strongly
    /// approximate equilibrium at this earning relaxation, in addition
    /// to the exact test
    #[arg(long)]
    eps: Option<f64>,
    /// Relative first-order termination tolerance (gfw)
    #[arg(long)]
    term_tol: Option<f64>,
    /// Projection gap tolerance (epm)
    #[arg(long)]
    proj_tol: Option<f64>,
    /// Iteration cap
    #[arg(long)]
    max_iters: Option<usize>,
    /// Directory for the candidate/certificate/trace files
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of instance JSON files
    dir: PathBuf,
    /// Algorithm to run; repeat the flag to run several (default: both)
    #[arg(long, value_enum)]
    algo: Vec<AlgoArg>,
    /// Earning relaxation defining `solved_approx`
    #[arg(long, default_value_t = DEFAULT_APPROX_EPS)]
    eps: f64,
    /// Relative first-order termination tolerance (gfw)
    #[arg(long)]
    term_tol: Option<f64>,
    /// Projection gap tolerance (epm)
    #[arg(long)]
    proj_tol: Option<f64>,
    /// Iteration cap
    #[arg(long)]
    max_iters: Option<usize>,
    /// Worker threads (each instance is still solved single-threaded)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for bench-rows.csv and bench-summary.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHORES_EQ_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();

    if let Some(dist) = args.dist {
        let n = args.n.context("--dist requires --n")?;
        let dist: Dist = dist.into();
        for seed in args.seed..args.seed + args.count {
            let inst = generate(&GenSpec::new(n, dist, seed))?;
            let path = args.out.join(format!("{dist}-n{n}-seed{seed}.json"));
            inst.write_json(&path)?;
            written.push(path);
        }
    } else if let Some(fixture) = args.fixture {
        let (name, inst) = match fixture {
            FixtureArg::SingleChore => {
                ("single-chore.json".to_string(), chores_eq::instances::single_chore_pair())
            }
            FixtureArg::Wide => (
                format!("wide-seed{}.json", args.seed),
                chores_eq::instances::wide_pair(args.seed),
            ),
            FixtureArg::ExtremeRatio => (
                format!("extreme-ratio-r{}-eps{}.json", args.ratio, args.eps),
                chores_eq::instances::extreme_ratio_pair(args.ratio, args.eps)?,
            ),
        };
        let path = args.out.join(name);
        inst.write_json(&path)?;
        written.push(path);
    } else if let Some(csv) = &args.bidding {
        let n = args.n.context("--bidding requires --n")?;
        let text = std::fs::read_to_string(csv)
            .with_context(|| format!("reading bidding CSV {}", csv.display()))?;
        let labels = parse_bidding_csv(&text)?;
        for seed in args.seed..args.seed + args.count {
            let spec = BidSpec { noise_sd: args.noise_sd, seed, ..BidSpec::default() };
            let inst = subsample_bidding(&labels, n, &spec)?;
            let path = args.out.join(format!("bidding-n{n}-seed{seed}.json"));
            inst.write_json(&path)?;
            written.push(path);
        }
    }

    for path in &written {
        println!("{}", path.display());
    }
    log::info!("wrote {} instance file(s)", written.len());
    Ok(0)
}

/// What `solve` and each `bench` row record about one run.
struct RunOutcome {
    status: String,
    iters: usize,
    certificate: Certificate,
    prices: Vec<f64>,
    first_eps_hit: Option<usize>,
    trace_csv: String,
    candidate_json: String,
}

fn run_gfw(
    inst: &ChoresInstance,
    eps: Option<f64>,
    term_tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<RunOutcome> {
    let mut cfg = GfwConfig { eps_target: eps, max_iters, ..GfwConfig::default() };
    if let Some(t) = term_tol {
        cfg.term_tol = t;
    }
    let res = gfw::run(inst, &cfg)?;
    let candidate = res.final_iterate.candidate();
    let certificate = certify_ce(inst, &candidate)?;
    Ok(RunOutcome {
        status: res.status.to_string(),
        iters: res.iters,
        certificate,
        prices: candidate.prices.clone(),
        first_eps_hit: res.first_eps_hit,
        trace_csv: res.trace_csv(),
        candidate_json: candidate.to_json_string()?,
    })
}

fn run_epm(
    inst: &ChoresInstance,
    proj_tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<RunOutcome> {
    let mut cfg = EpmConfig::default();
    if let Some(t) = proj_tol {
        cfg.proj_tol = t;
    }
    if let Some(k) = max_iters {
        cfg.max_iters = k;
    }
    let run = epm_run(inst, &cfg)?;
    Ok(RunOutcome {
        status: run.state.status.to_string(),
        iters: run.state.k,
        certificate: run.certificate,
        prices: run.candidate.prices.clone(),
        first_eps_hit: None,
        trace_csv: run.trace_csv(),
        candidate_json: run.candidate.to_json_string()?,
    })
}

fn solved_at_requested_level(cert: &Certificate, eps: Option<f64>) -> bool {
    cert.is_exact(EXACT_TOL) || eps.is_some_and(|e| cert.strongly_approx(e, EXACT_TOL))
}

fn format_prices(prices: &[f64]) -> String {
    let mut s = String::from("[");
    for (j, p) in prices.iter().enumerate() {
        if j > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{p}");
    }
    s.push(']');
    s
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let inst = ChoresInstance::read_json(&args.instance)
        .with_context(|| format!("loading instance {}", args.instance.display()))?;
    let stem = args
        .instance
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("instance")
        .to_string();
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let outcome = match args.algo {
        AlgoArg::Gfw => run_gfw(&inst, args.eps, args.term_tol, args.max_iters),
        AlgoArg::Epm => run_epm(&inst, args.proj_tol, args.max_iters),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return Ok(1);
        }
    };

    let algo = args.algo.name();
    let candidate_path = args.out.join(format!("{stem}.{algo}.candidate.json"));
    let certificate_path = args.out.join(format!("{stem}.{algo}.certificate.json"));
    let trace_path = args.out.join(format!("{stem}.{algo}.trace.csv"));
    std::fs::write(&candidate_path, &outcome.candidate_json)?;
    std::fs::write(&certificate_path, serde_json::to_string_pretty(&outcome.certificate)?)?;
    std::fs::write(&trace_path, &outcome.trace_csv)?;

    let cert = &outcome.certificate;
    println!(
        "algo={algo} status={} iters={} eps_earning={:.3e} eps_optimality={:.3e} eps_supply={:.3e}",
        outcome.status, outcome.iters, cert.eps_earning, cert.eps_optimality, cert.eps_supply
    );
    println!("prices={}", format_prices(&outcome.prices));
    if let Some(t) = outcome.first_eps_hit {
        println!(
            "first iterate at requested approximation level {}: t={t}",
            args.eps.unwrap_or(DEFAULT_APPROX_EPS)
        );
    }
    println!(
        "wrote {} {} {}",
        candidate_path.display(),
        certificate_path.display(),
        trace_path.display()
    );

    Ok(if solved_at_requested_level(cert, args.eps) { 0 } else { 1 })
}

/// One benchmark result row; `certificate` is absent when the solver
/// errored out.
struct BenchRow {
    algo: &'static str,
    n: usize,
    dist: String,
    seed: u64,
    status: String,
    iters: usize,
    wall_ms: f64,
    certificate: Option<Certificate>,
    solved_exact: bool,
    solved_approx: bool,
}

/// Recovers `(dist, seed)` from the `gen` filename convention
/// `<dist>-n<k>-seed<s>`; anything else keeps the stem as the
/// distribution id with seed 0.
fn parse_stem(stem: &str) -> (String, u64) {
    if let Some(pos) = stem.rfind("-seed") {
        if let Ok(seed) = stem[pos + 5..].parse::<u64>() {
            let head = &stem[..pos];
            let dist = match head.rfind("-n") {
                Some(npos) if head[npos + 2..].chars().all(|c| c.is_ascii_digit()) => {
                    head[..npos].to_string()
                }
                _ => head.to_string(),
            };
            return (dist, seed);
        }
    }
    (stem.to_string(), 0)
}

fn bench_one(
    path: &Path,
    algo: AlgoArg,
    args: &BenchArgs,
) -> Result<BenchRow> {
    let inst = ChoresInstance::read_json(path)
        .with_context(|| format!("loading instance {}", path.display()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    let (dist, seed) = parse_stem(stem);

    let start = Instant::now();
    let outcome = match algo {
        AlgoArg::Gfw => run_gfw(&inst, None, args.term_tol, args.max_iters),
        AlgoArg::Epm => run_epm(&inst, args.proj_tol, args.max_iters),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    Ok(match outcome {
        Ok(o) => {
            let solved_exact = o.certificate.is_exact(EXACT_TOL);
            let solved_approx =
                solved_exact || o.certificate.strongly_approx(args.eps, EXACT_TOL);
            BenchRow {
                algo: algo.name(),
                n: inst.n(),
                dist,
                seed,
                status: o.status,
                iters: o.iters,
                wall_ms,
                certificate: Some(o.certificate),
                solved_exact,
                solved_approx,
            }
        }
        Err(e) => {
            log::warn!("{} [{}] failed: {e}", path.display(), algo.name());
            BenchRow {
                algo: algo.name(),
                n: inst.n(),
                dist,
                seed,
                status: "error".to_string(),
                iters: 0,
                wall_ms,
                certificate: None,
                solved_exact: false,
                solved_approx: false,
            }
        }
    })
}

fn rows_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "algo,n,dist,seed,status,iters,wall_ms,eps_earning,eps_optimality,eps_supply,\
         solved_exact,solved_approx\n",
    );
    for r in rows {
        let (e1, e2, e3) = match &r.certificate {
            Some(c) => (
                format!("{}", c.eps_earning),
                format!("{}", c.eps_optimality),
                format!("{}", c.eps_supply),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.algo,
            r.n,
            r.dist,
            r.seed,
            r.status,
            r.iters,
            r.wall_ms,
            e1,
            e2,
            e3,
            r.solved_exact,
            r.solved_approx
        );
    }
    out
}

fn summary_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "algo,dist,n,instances,solved_exact_fraction,solved_approx_fraction,\
         mean_iters_solved,median_iters_solved,mean_wall_ms_solved\n",
    );
    let mut keys: Vec<(&str, &str, usize)> =
        rows.iter().map(|r| (r.algo, r.dist.as_str(), r.n)).collect();
    keys.sort_unstable();
    keys.dedup();
    for (algo, dist, n) in keys {
        let group: Vec<&BenchRow> = rows
            .iter()
            .filter(|r| r.algo == algo && r.dist == dist && r.n == n)
            .collect();
        let total = group.len();
        let exact = group.iter().filter(|r| r.solved_exact).count();
        let approx = group.iter().filter(|r| r.solved_approx).count();
        let solved: Vec<&&BenchRow> = group.iter().filter(|r| r.solved_exact).collect();
        let mean_iters = if solved.is_empty() {
            f64::NAN
        } else {
            solved.iter().map(|r| r.iters as f64).sum::<f64>() / solved.len() as f64
        };
        let median_iters = if solved.is_empty() {
            f64::NAN
        } else {
            let mut iters: Vec<usize> = solved.iter().map(|r| r.iters).collect();
            iters.sort_unstable();
            let mid = iters.len() / 2;
            if iters.len() % 2 == 1 {
                iters[mid] as f64
            } else {
                (iters[mid - 1] + iters[mid]) as f64 / 2.0
            }
        };
        let mean_wall = if solved.is_empty() {
            f64::NAN
        } else {
            solved.iter().map(|r| r.wall_ms).sum::<f64>() / solved.len() as f64
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            algo,
            dist,
            n,
            total,
            exact as f64 / total as f64,
            approx as f64 / total as f64,
            mean_iters,
            median_iters,
            mean_wall
        );
    }
    out
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .with_context(|| format!("reading instance directory {}", args.dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    let algos: Vec<AlgoArg> =
        if args.algo.is_empty() { vec![AlgoArg::Gfw, AlgoArg::Epm] } else { args.algo.clone() };
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }

    let tasks: Vec<(usize, &PathBuf, AlgoArg)> = files
        .iter()
        .flat_map(|f| algos.iter().map(move |&a| (f, a)))
        .enumerate()
        .map(|(i, (f, a))| (i, f, a))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, BenchRow)>> = Mutex::new(Vec::with_capacity(tasks.len()));
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for _ in 0..args.jobs.min(tasks.len().max(1)) {
            handles.push(scope.spawn(|| -> Result<()> {
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= tasks.len() {
                        return Ok(());
                    }
                    let (idx, path, algo) = tasks[i];
                    let row = bench_one(path, algo, &args)?;
                    results.lock().expect("no poisoned worker").push((idx, row));
                }
            }));
        }
        for h in handles {
            h.join().expect("worker thread must not panic")?;
        }
        Ok(())
    })?;
    let mut rows = results.into_inner().expect("workers finished");
    rows.sort_by_key(|(idx, _)| *idx);
    let rows: Vec<BenchRow> = rows.into_iter().map(|(_, r)| r).collect();

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let rows_path = args.out.join("bench-rows.csv");
    let summary_path = args.out.join("bench-summary.csv");
    std::fs::write(&rows_path, rows_csv(&rows))?;
    let summary = summary_csv(&rows);
    std::fs::write(&summary_path, &summary)?;

    print!("{summary}");
    println!("wrote {} and {}", rows_path.display(), summary_path.display());
    Ok(0)
}
