use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polypack::geometry::sample_uniform;
use polypack::bounds::{bounds_report, fit_asymptotics, FitRecord};
use polypack::io::{
    params_hash, read_record, render_svg, verify, write_record, PackingRecord, RecordStore,
    RenderOptions, StoreOutcome,
};
use polypack::metrics::{compute_metrics, necklace_tour, DEFAULT_CONTACT_TOL};
use polypack::optimizer::{multi_restart, SolverParams};
use polypack::refinement::{fill_holes, shake, variance_refine, RefineParams};
use polypack::topology::{charge_ledger, classify_cells, clipped_voronoi, DEFAULT_MERGE_TOL};
use polypack::{Configuration, Convention, Error, PolygonSpec};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "polypack", version, about = "Dense packings of congruent disks in regular polygons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best of several annealing runs; writes a record file and/or updates a store.
    Solve(SolveArgs),
    /// Improves a stored configuration.
    Refine(RefineArgs),
    /// Packing metrics as JSON.
    Analyze(InputArgs),
    /// Voronoi charge ledger as JSON, optionally with an SVG overlay.
    Voronoi(VoronoiArgs),
    /// Density and border-count bounds as JSON.
    Bounds(BoundsArgs),
    /// Shortest closed tour through the centers and the necklace verdict.
    Necklace(InputArgs),
    /// Uniform points in the unit polygon as `index x y` lines.
    Sample(SampleArgs),
    /// Large-N coefficients fitted to the records of a store, as CSV.
    Fit(FitArgs),
    /// SVG drawing of a record.
    Render(RenderArgs),
    /// Solves every (sigma, n) of a sweep into a store.
    Batch(BatchArgs),
    /// Audits a record file.
    Verify(InputArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    sigma: u32,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "I")]
    convention: ConventionArg,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Skip the final contact polish.
    #[arg(long)]
    no_polish: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Shake,
    Variance,
    Holes,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Contact threshold relative to the minimal distance (variance) or hole tolerance (holes).
    #[arg(long)]
    tol: Option<f64>,
    /// Proposals per cycle.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Relative contact tolerance.
    #[arg(long, default_value_t = DEFAULT_CONTACT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VoronoiArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Vertex merge tolerance relative to r.
    #[arg(long, default_value_t = DEFAULT_MERGE_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    sigma: u32,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    sigma: u32,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    sigma: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    svg: PathBuf,
    #[arg(long)]
    voronoi: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// Single value or inclusive range `a..b`.
    #[arg(long, default_value = "3..16")]
    sigma: Span,
    #[arg(long, default_value = "2..200")]
    n: Span,
    #[arg(long, default_value = "I")]
    convention: ConventionArg,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    store: PathBuf,
}

#[derive(Clone, Copy)]
struct ConventionArg(Convention);

impl FromStr for ConventionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Convention::from_str(s).map(ConventionArg).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy)]
struct Span(usize, usize);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        match s.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range {s}"));
                }
                Ok(Span(a, b))
            }
            None => num(s).map(|v| Span(v, v)),
        }
    }
}

/// Failure carrying the exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::Json(_) | Error::Io(_) | Error::InvalidInput(_) | Error::InvalidSigma(_) => 2,
            Error::Audit(_) | Error::Overlap { .. } | Error::OutsideContainer { .. } | Error::LedgerViolation(_) => 3,
            Error::StoreConflict(_) => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::Json)?;
    s.push('\n');
    Ok(s)
}

fn load(path: &Path) -> CliResult<Configuration> {
    let record = read_record(path)?;
    verify(&record)?;
    Ok(record.to_configuration()?)
}

fn report_store(outcome: StoreOutcome, sigma: u32, n: usize) {
    match outcome {
        StoreOutcome::Inserted => eprintln!("sigma={sigma} n={n}: stored"),
        StoreOutcome::Replaced { previous } => eprintln!("sigma={sigma} n={n}: replaced rho {previous:.12}"),
        StoreOutcome::Kept { stored } => eprintln!("sigma={sigma} n={n}: kept stored rho {stored:.12}"),
    }
}

fn save(record: &PackingRecord, out: Option<&Path>, store: Option<&Path>) -> CliResult {
    if let Some(dir) = store {
        let outcome = RecordStore::open(dir)?.submit(record)?;
        report_store(outcome, record.sigma, record.n);
    }
    match out {
        Some(path) => write_record(path, record)?,
        None if store.is_none() => print!("{}", record.to_json()?),
        None => {}
    }
    Ok(())
}

fn solve(args: SolveArgs) -> CliResult {
    let spec = PolygonSpec::new(args.sigma, args.convention.0)?;
    let params = SolverParams {
        restarts: args.restarts,
        seed: args.seed,
        polish: !args.no_polish,
        ..SolverParams::default()
    };
    let cfg = multi_restart(spec, args.n, &params)?;
    eprintln!("rho = {:.15}", cfg.rho());
    let record = PackingRecord::from_configuration(&cfg, Some(args.seed), params_hash(&params));
    save(&record, args.out.as_deref(), args.store.as_deref())?;
    if let Some(svg) = args.svg {
        emit(Some(&svg), &render_svg(&cfg, &RenderOptions::default()))?;
    }
    Ok(())
}

fn refine(args: RefineArgs) -> CliResult {
    let cfg = load(&args.input)?;
    let mut params = RefineParams::default();
    if let Some(runs) = args.runs {
        params.runs_per_cycle = runs;
    }
    let out = match args.method {
        Method::Shake => shake(&cfg, &params, args.seed)?,
        Method::Variance => {
            if let Some(tol) = args.tol {
                params.eta = tol;
            }
            let outcome = variance_refine(&cfg, &params)?;
            eprintln!(
                "Sigma {:.3e} -> {:.3e}, rho {:.15} -> {:.15}, {} steps",
                outcome.variance_before, outcome.variance, outcome.rho_before, outcome.rho, outcome.accepted
            );
            outcome.config
        }
        Method::Holes => {
            if let Some(tol) = args.tol {
                params.hole_tol = tol;
            }
            fill_holes(&cfg, &params, args.seed)?
        }
    };
    eprintln!("rho = {:.15}", out.rho());
    let record = PackingRecord::from_configuration(&out, Some(args.seed), params_hash(&params));
    save(&record, args.out.as_deref(), args.store.as_deref())
}

fn analyze(args: InputArgs) -> CliResult {
    let cfg = load(&args.input)?;
    let metrics = compute_metrics(&cfg, args.tol)?;
    emit(args.out.as_deref(), &json(&metrics)?)
}

fn voronoi(args: VoronoiArgs) -> CliResult {
    let cfg = load(&args.input)?;
    let diagram = classify_cells(clipped_voronoi(&cfg)?, args.tol);
    let ledger = charge_ledger(&diagram)?;
    emit(args.out.as_deref(), &json(&ledger)?)?;
    if let Some(svg) = args.svg {
        let opts = RenderOptions {
            voronoi: true,
            ..RenderOptions::default()
        };
        emit(Some(&svg), &render_svg(&cfg, &opts))?;
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> CliResult {
    emit(None, &json(&bounds_report(args.n, args.sigma)?)?)
}

fn necklace(args: InputArgs) -> CliResult {
    let cfg = load(&args.input)?;
    let report = necklace_tour(&cfg, args.tol)?;
    emit(args.out.as_deref(), &json(&report)?)
}

fn sample(args: SampleArgs) -> CliResult {
    PolygonSpec::new(args.sigma, Convention::I)?;
    let points = sample_uniform(args.n, args.sigma, args.seed);
    let text: String = points
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{} {:.17e} {:.17e}\n", i + 1, p.x, p.y))
        .collect();
    emit(args.out.as_deref(), &text)
}

fn fit(args: FitArgs) -> CliResult {
    let store = RecordStore::open(&args.store)?;
    let records = store.records()?;
    let mut sigmas: Vec<u32> = records.iter().map(|r| r.sigma).collect();
    sigmas.dedup();
    if let Some(s) = args.sigma {
        sigmas.retain(|&x| x == s);
    }
    let mut csv = String::from("sigma,a1,a2,b1,b2,b3,rho_residual,nb_residual\n");
    for sigma in sigmas {
        let data: Vec<FitRecord> = records
            .iter()
            .filter(|r| r.sigma == sigma)
            .filter_map(|r| {
                r.metrics.as_ref().map(|m| FitRecord {
                    n: r.n,
                    rho: r.rho,
                    border_count: m.border_count,
                })
            })
            .collect();
        match fit_asymptotics(&data) {
            Ok(f) => csv.push_str(&format!(
                "{sigma},{},{},{},{},{},{},{}\n",
                f.a1, f.a2, f.b1, f.b2, f.b3, f.rho_residual, f.nb_residual
            )),
            Err(e) => eprintln!("sigma={sigma}: {e}"),
        }
    }
    emit(args.out.as_deref(), &csv)
}

fn render(args: RenderArgs) -> CliResult {
    let cfg = load(&args.input)?;
    let opts = RenderOptions {
        voronoi: args.voronoi,
        ..RenderOptions::default()
    };
    emit(Some(&args.svg), &render_svg(&cfg, &opts))
}

fn batch(args: BatchArgs) -> CliResult {
    if args.sigma.0 < 3 || args.n.0 < 2 {
        return Err(Error::InvalidInput("batch needs sigma >= 3 and n >= 2".into()).into());
    }
    let store = RecordStore::open(&args.store)?;
    let writer = Mutex::new(());
    let jobs: Vec<(u32, usize)> = (args.sigma.0..=args.sigma.1)
        .flat_map(|s| (args.n.0..=args.n.1).map(move |n| (s as u32, n)))
        .collect();
    let failures: Vec<Failure> = jobs
        .par_iter()
        .filter_map(|&(sigma, n)| {
            let run = || -> CliResult {
                let spec = PolygonSpec::new(sigma, args.convention.0)?;
                let params = SolverParams {
                    restarts: args.restarts,
                    seed: args.seed,
                    ..SolverParams::default()
                };
                let cfg = multi_restart(spec, n, &params)?;
                let record = PackingRecord::from_configuration(&cfg, Some(args.seed), params_hash(&params));
                let _turn = writer.lock().unwrap_or_else(|p| p.into_inner());
                let outcome = store.submit(&record)?;
                report_store(outcome, sigma, n);
                Ok(())
            };
            run().err()
        })
        .collect();
    for f in &failures {
        eprintln!("error: {}", f.message);
    }
    match failures.into_iter().max_by_key(|f| f.code) {
        Some(worst) => Err(worst),
        None => Ok(()),
    }
}

fn verify_cmd(args: InputArgs) -> CliResult {
    let record = read_record(&args.input)?;
    verify(&record)?;
    eprintln!("ok: sigma={} n={} rho={:.15}", record.sigma, record.n, record.rho);
    Ok(())
}

fn configure_threads() {
    if let Some(k) = std::env::var("POLYPACK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Refine(a) => refine(a),
        Command::Analyze(a) => analyze(a),
        Command::Voronoi(a) => voronoi(a),
        Command::Bounds(a) => bounds(a),
        Command::Necklace(a) => necklace(a),
        Command::Sample(a) => sample(a),
        Command::Fit(a) => fit(a),
        Command::Render(a) => render(a),
        Command::Batch(a) => batch(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
