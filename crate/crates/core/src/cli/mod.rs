//! `npqc-lab`: seeded batch experiments writing CSV files whose first line is
//! a `#`-prefixed JSON header holding the full configuration.
//!
//! Passing any output file back through `--config` reproduces its data rows.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::npqc::Variant;
use crate::superposition::PerpChoice;
use crate::train::{Init, Method};

pub use config::{QfimJob, ScanJob, SenseJob, SuperposeJob, ThetaMode, TrainJob};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Json(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::Capacity(_) => EXIT_CAPACITY,
                Error::Depth { .. } | Error::Infeasible(_) => EXIT_INFEASIBLE,
                Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Variant { .. } => EXIT_USAGE,
                _ => EXIT_FAILURE,
            },
            CliError::Io(_) | CliError::Csv(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "npqc-lab", version, about = "Seeded NPQC experiments with CSV output")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config, or a previous output CSV (its header is reused).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// QFIM at θ_r or a random θ, plus trace and spectrum summary.
    Qfim(QfimArgs),
    /// Training traces per method and seed.
    Train(TrainArgs),
    /// Single-step infidelity scan with power-law fit.
    Scan(ScanArgs),
    /// Computational-basis sensing and Cramér-Rao checks (Y-only circuit).
    Sense(SenseArgs),
    /// Superposition-state synthesis sweep.
    Superpose(SuperposeArgs),
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Qubits (even).
    #[arg(long)]
    pub n: Option<usize>,
    /// Entangling layers.
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Debug, Args)]
pub struct QfimArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long, value_parser = parse_theta)]
    pub theta: Option<ThetaMode>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Repeatable or comma separated: adaptive, standard, adam.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub method: Vec<Method>,
    #[arg(long, value_parser = parse_init)]
    pub init: Option<Init>,
    /// Initial infidelity to the target.
    #[arg(long)]
    pub dk: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Infidelity at which training stops.
    #[arg(long)]
    pub target: Option<f64>,
    /// Infidelity used for the iteration-count comparison.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Repeatable or comma separated: reference, random.
    #[arg(long, value_delimiter = ',', value_parser = parse_init)]
    pub init: Vec<Init>,
    /// Initial infidelities, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dk: Vec<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SenseArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Shift norms |Δθ|, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub norm: Vec<f64>,
    /// Shot budgets: `1e4,4e4` or decades `1e2..1e6`.
    #[arg(long, value_parser = parse_shot_list)]
    pub shots: Option<ShotList>,
    /// Only the exact-probability row.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub instances: Option<usize>,
    /// Random θ draws for the Cramér-Rao check.
    #[arg(long)]
    pub crao_draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SuperposeArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Layer counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<usize>,
    /// Target infidelities ΔK_t(θ_r), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dk: Vec<f64>,
    #[arg(long)]
    pub targets: Option<usize>,
    /// Random requests per target (ignored with --grid).
    #[arg(long)]
    pub requests: Option<usize>,
    /// Regular G×G grid of (K_rs, K_ts) instead of random requests.
    #[arg(long)]
    pub grid: Option<usize>,
    /// random | least_aligned
    #[arg(long, value_parser = parse_perp)]
    pub perp: Option<PerpMode>,
}

/// Orthogonal-direction rule for sweeps; random directions are seeded per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerpMode {
    Random,
    LeastAligned,
}

impl PerpMode {
    pub(crate) fn choice(self, seed: u64) -> PerpChoice {
        match self {
            PerpMode::Random => PerpChoice::Random(seed),
            PerpMode::LeastAligned => PerpChoice::LeastAligned,
        }
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    match s.to_ascii_lowercase().as_str() {
        "full" => Ok(Variant::Full),
        "y_only" | "y-only" | "yonly" | "y" => Ok(Variant::YOnly),
        _ => Err(format!("unknown variant `{s}` (full, y_only)")),
    }
}

fn parse_theta(s: &str) -> Result<ThetaMode, String> {
    match s {
        "reference" | "ref" => Ok(ThetaMode::Reference),
        "random" => Ok(ThetaMode::Random),
        _ => Err(format!("unknown θ mode `{s}` (reference, random)")),
    }
}

fn parse_init(s: &str) -> Result<Init, String> {
    match s {
        "reference" | "ref" => Ok(Init::Reference),
        "random" => Ok(Init::Random),
        _ => Err(format!("unknown init `{s}` (reference, random)")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "adaptive" | "adaptive_ga" | "a-g" => Ok(Method::AdaptiveGa),
        "standard" | "standard_ga" | "s-g" => Ok(Method::StandardGa),
        "adam" => Ok(Method::Adam),
        _ => Err(format!("unknown method `{s}` (adaptive, standard, adam)")),
    }
}

fn parse_perp(s: &str) -> Result<PerpMode, String> {
    match s {
        "random" => Ok(PerpMode::Random),
        "least_aligned" | "least-aligned" => Ok(PerpMode::LeastAligned),
        _ => Err(format!("unknown direction rule `{s}` (random, least_aligned)")),
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if !(x >= 1.0) || x.fract() != 0.0 || x > u64::MAX as f64 {
        return Err(format!("shot budget must be a positive integer, got `{s}`"));
    }
    Ok(x as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotList(pub Vec<u64>);

fn parse_shot_list(s: &str) -> Result<ShotList, String> {
    parse_shots(s).map(ShotList)
}

/// Comma-separated counts; `a..b` expands to `a, 10a, …, b`.
pub fn parse_shots(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').filter(|t| !t.trim().is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (mut a, b) = (parse_count(a)?, parse_count(b)?);
            if a > b {
                return Err(format!("empty range `{item}`"));
            }
            while a <= b {
                out.push(a);
                a = a.checked_mul(10).ok_or("range overflows")?;
            }
        } else {
            out.push(parse_count(item)?);
        }
    }
    if out.is_empty() {
        return Err("no shot budgets given".into());
    }
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("npqc-lab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    crate::exec::with_threads(threads, || commands::dispatch(cli))
}
