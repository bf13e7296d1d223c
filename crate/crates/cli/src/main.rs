//! `intpoints` command-line front end.

mod manifest;
mod table;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use intpoints::bounds_lab::{run_check, CheckId, GridConfig};
use intpoints::curve_models::{BoxSpec, Curve, ShortCurve};
use intpoints::delpezzo::{count_s_n, DP1Surface};
use intpoints::heights::{canonical_height_decomposed, RationalPoint};
use intpoints::lattice_modular::{associate_tau, SeriesControl};
use intpoints::point_enum::{
    arbitrary_box_pipeline, enumerate_box, main_theorem_pipeline, sieve_certified_interval, Branch,
    BranchBound, DEFAULT_DELTA, DEFAULT_K,
};

use manifest::{strip_timings, RunManifest};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "intpoints",
    version,
    about = "Integral points on elliptic curves"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Global {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write a CSV table (points, fibers or verification rows).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Working precision of the analytic modules.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    prec: Precision,
    /// Zero all timing fields so repeated runs are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Precision {
    F64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Brute,
    Sieve,
    Pipeline,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integral points of a curve in a box.
    Enumerate(EnumerateArgs),
    /// Canonical height of a rational point split into local heights.
    Height(HeightArgs),
    /// The tau in the fundamental set with a given real j.
    Tau(TauArgs),
    /// Certified large-sieve bound for an x-interval.
    SieveBound(SieveArgs),
    /// The counting pipeline for the box [-N^2, N^2] x [-N^3, N^3].
    Pipeline(PipelineArgs),
    /// Numerical verification of the analytic lemmas.
    Verify(VerifyArgs),
    /// Fiberwise point count on a degree-1 del Pezzo surface.
    Delpezzo(DelpezzoArgs),
}

#[derive(Debug, Args, Serialize)]
struct EnumerateArgs {
    /// Curve JSON, or @path to a JSON file.
    #[arg(long)]
    curve: String,
    /// Box JSON, either [x_lo,x_hi,y_lo,y_hi] or {"x":[..],"y":[..]}.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    bx: String,
    #[arg(long, value_enum, default_value_t = Method::Brute)]
    method: Method,
    /// Epsilon of the arbitrary-box pipeline.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Use the largest measured per-prime alpha instead of 3/4.
    #[arg(long)]
    exact_alpha: bool,
}

#[derive(Debug, Args, Serialize)]
struct HeightArgs {
    #[arg(long)]
    curve: String,
    /// x-coordinate, an integer or p/q.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    #[arg(long, default_value_t = 1e-18)]
    series_tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct TauArgs {
    #[arg(long, allow_hyphen_values = true)]
    j: f64,
    #[arg(long, default_value_t = 1e-18)]
    series_tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct SieveArgs {
    #[arg(long)]
    curve: String,
    /// Interval JSON [lo, hi].
    #[arg(long, allow_hyphen_values = true)]
    interval: String,
    #[arg(long)]
    exact_alpha: bool,
}

#[derive(Debug, Args, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    curve: String,
    #[arg(long = "N")]
    n: u64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: f64,
    /// Override epsilon = delta / k; delta becomes eps * k.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// Check id (L3, L4, L5, L6, L7, L8, COR1, JW, UB, P1/COR2, L13); repeatable.
    #[arg(long, required_unless_present = "all")]
    check: Vec<String>,
    #[arg(long, conflicts_with = "check")]
    all: bool,
    /// Use the reduced smoke-test grid.
    #[arg(long)]
    coarse: bool,
    #[arg(long)]
    tau_per_arc: Option<usize>,
    #[arg(long)]
    u_samples: Option<usize>,
    #[arg(long)]
    x_samples: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct DelpezzoArgs {
    /// Surface JSON {"F4":[5 ints],"F6":[7 ints]}, or @path.
    #[arg(long)]
    surface: String,
    #[arg(long = "N")]
    n: u64,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<intpoints::Error> for Failure {
    fn from(e: intpoints::Error) -> Self {
        Failure {
            code: if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_VALIDATION
            },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::validation(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

/// What a subcommand produces before it is wrapped with its manifest.
struct Output {
    report: Value,
    csv: Option<String>,
    summary: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Failure::validation("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::validation(e.to_string()))?;
    }
    let start = Instant::now();
    let (name, args) = match &cli.command {
        Command::Enumerate(a) => ("enumerate", serde_json::to_value(a)?),
        Command::Height(a) => ("height", serde_json::to_value(a)?),
        Command::Tau(a) => ("tau", serde_json::to_value(a)?),
        Command::SieveBound(a) => ("sieve-bound", serde_json::to_value(a)?),
        Command::Pipeline(a) => ("pipeline", serde_json::to_value(a)?),
        Command::Verify(a) => ("verify", serde_json::to_value(a)?),
        Command::Delpezzo(a) => ("delpezzo", serde_json::to_value(a)?),
    };
    let config = json!({
        "args": args,
        "seed": cli.global.seed,
        "jobs": cli.global.jobs,
        "prec": cli.global.prec,
        "deterministic": cli.global.deterministic,
    });
    let mut manifest = RunManifest::new(name, config);
    let output = match &cli.command {
        Command::Enumerate(a) => enumerate(a, &mut manifest)?,
        Command::Height(a) => height(a, &mut manifest)?,
        Command::Tau(a) => tau(a)?,
        Command::SieveBound(a) => sieve_bound(a, &mut manifest)?,
        Command::Pipeline(a) => pipeline(a, &mut manifest)?,
        Command::Verify(a) => verify(a, &mut manifest)?,
        Command::Delpezzo(a) => delpezzo(a, &mut manifest)?,
    };
    manifest.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut doc = json!({ "manifest": manifest, "report": output.report });
    if cli.global.deterministic {
        strip_timings(&mut doc);
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    match &cli.global.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &cli.global.csv {
        let csv = output
            .csv
            .ok_or_else(|| Failure::validation(format!("{name} has no CSV output")))?;
        fs::write(path, csv)?;
    }
    if let Some(summary) = output.summary {
        eprint!("{summary}");
    }
    Ok(())
}

/// Inline JSON, or the contents of the file after a leading `@`.
fn read_input(raw: &str) -> CliResult<String> {
    match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read {path}: {e}"))),
        None => Ok(raw.to_string()),
    }
}

fn load_curve(raw: &str, manifest: &mut RunManifest) -> CliResult<Curve> {
    let text = read_input(raw)?;
    manifest.digest("curve", &text);
    Ok(Curve::from_json(&text)?)
}

fn short_model(curve: &Curve) -> CliResult<ShortCurve> {
    curve
        .as_short()
        .ok_or_else(|| Failure::validation("this operation needs a short model y^2 = x^3 + Ax + B"))
}

fn enumerate(a: &EnumerateArgs, manifest: &mut RunManifest) -> CliResult<Output> {
    let curve = load_curve(&a.curve, manifest)?;
    let box_text = read_input(&a.bx)?;
    manifest.digest("box", &box_text);
    let bx = BoxSpec::from_json(&box_text)?;
    let long = curve.to_long();
    let mut extra = Value::Null;
    let report = match a.method {
        Method::Brute => enumerate_box(&long, &bx)?,
        Method::Pipeline => arbitrary_box_pipeline(&long, &bx, a.eps)?,
        Method::Sieve => {
            let short = short_model(&curve)?;
            let cert = sieve_certified_interval(&short, bx.x_lo, bx.x_hi, a.exact_alpha)?;
            let mut report = enumerate_box(&long, &bx)?;
            let count = report.count().unwrap_or(0) as u64;
            let bound = 2.0 * cert.bound;
            report.upper_bound = Some(bound);
            report.branch = Branch::LargeSieve;
            report.branches.push(BranchBound {
                branch: Branch::LargeSieve,
                bound,
                exact_count: Some(count),
                certified: true,
            });
            extra = serde_json::to_value(&cert)?;
            report
        }
    };
    let csv = report.points.as_ref().map(|pts| table::points_csv(pts));
    let mut value = serde_json::to_value(&report)?;
    if !extra.is_null() {
        value["certificate"] = extra;
    }
    Ok(Output {
        report: value,
        csv,
        summary: None,
    })
}

fn parse_rational(s: &str, name: &str) -> CliResult<BigRational> {
    s.trim().parse::<BigRational>().map_err(|_| {
        Failure::validation(format!("--{name}: expected an integer or p/q, got {s:?}"))
    })
}

fn height(a: &HeightArgs, manifest: &mut RunManifest) -> CliResult<Output> {
    let curve = load_curve(&a.curve, manifest)?;
    let short = short_model(&curve)?;
    let x = parse_rational(&a.x, "x")?;
    let y = parse_rational(&a.y, "y")?;
    let p = RationalPoint::new(&short, x, y)?;
    let ctl = SeriesControl::with_tolerance(a.series_tol);
    let b = canonical_height_decomposed(&short, &p, &ctl)?;
    let csv = table::height_csv(&b);
    Ok(Output {
        report: serde_json::to_value(&b)?,
        csv: Some(csv),
        summary: None,
    })
}

fn tau(a: &TauArgs) -> CliResult<Output> {
    let ctl = SeriesControl::with_tolerance(a.series_tol);
    let t = associate_tau(a.j, &ctl)?;
    let csv = table::tau_csv(&t);
    Ok(Output {
        report: serde_json::to_value(&t)?,
        csv: Some(csv),
        summary: None,
    })
}

fn sieve_bound(a: &SieveArgs, manifest: &mut RunManifest) -> CliResult<Output> {
    let curve = load_curve(&a.curve, manifest)?;
    let short = short_model(&curve)?;
    manifest.digest("interval", &a.interval);
    let (lo, hi): (i128, i128) = serde_json::from_str(&a.interval)
        .map_err(|e| Failure::validation(format!("--interval: expected [lo, hi]: {e}")))?;
    let cert = sieve_certified_interval(&short, lo, hi, a.exact_alpha)?;
    let csv = table::sieve_csv(&cert);
    Ok(Output {
        report: serde_json::to_value(&cert)?,
        csv: Some(csv),
        summary: None,
    })
}

fn pipeline(a: &PipelineArgs, manifest: &mut RunManifest) -> CliResult<Output> {
    let curve = load_curve(&a.curve, manifest)?;
    let delta = a.eps.map_or(a.delta, |eps| eps * a.k);
    let report = main_theorem_pipeline(&curve.to_long(), a.n, delta, a.k)?;
    let csv = table::branches_csv(&report.branches);
    Ok(Output {
        report: serde_json::to_value(&report)?,
        csv: Some(csv),
        summary: None,
    })
}

fn verify(a: &VerifyArgs, _manifest: &mut RunManifest) -> CliResult<Output> {
    let ids: Vec<CheckId> = if a.all {
        CheckId::ALL.to_vec()
    } else {
        a.check
            .iter()
            .map(|s| {
                s.parse::<CheckId>()
                    .map_err(|_| Failure::validation(format!("unknown check id {s:?}")))
            })
            .collect::<CliResult<_>>()?
    };
    let mut grid = if a.coarse {
        GridConfig::coarse()
    } else {
        GridConfig::default()
    };
    if let Some(v) = a.tau_per_arc {
        grid.tau_per_arc = v;
    }
    if let Some(v) = a.u_samples {
        grid.u_samples = v;
    }
    if let Some(v) = a.x_samples {
        grid.x_samples = v;
    }
    let reports = ids
        .iter()
        .map(|&id| run_check(id, &grid))
        .collect::<intpoints::Result<Vec<_>>>()?;
    Ok(Output {
        csv: Some(table::verify_csv(&reports)),
        summary: Some(table::verify_summary(&reports)),
        report: serde_json::to_value(&reports)?,
    })
}

fn delpezzo(a: &DelpezzoArgs, manifest: &mut RunManifest) -> CliResult<Output> {
    let text = read_input(&a.surface)?;
    manifest.digest("surface", &text);
    let surface = DP1Surface::from_json(&text)?;
    let report = count_s_n(&surface, a.n)?;
    Ok(Output {
        csv: Some(table::fibers_csv(&report)),
        report: serde_json::to_value(&report)?,
        summary: None,
    })
}
