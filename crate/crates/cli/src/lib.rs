//! Command-line front end: data ingestion, result files and plots.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence failure
//! (outputs are still written).

pub mod cases;
pub mod commands;
pub mod counts;
pub mod manifest;
pub mod output;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetop::dif::CombineRule;
use hetop::estimator::DiscriminationScale;
use hetop::{EmptyCellPolicy, PenaltyKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    /// Outputs were written but at least one fit did not converge.
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::NotConverged(_) => EXIT_CONVERGENCE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e:#}"),
            CliError::NotConverged(m) => write!(f, "convergence failure: {m}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "hetop", version, about = "Regularized heteroskedastic ordered probit models for single-item DIF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Aggregate a case CSV into a count CSV.
    Aggregate(AggregateArgs),
    /// Fit one model to a count CSV.
    Fit(FitArgs),
    /// Fit a regularization path over a grid of nu values.
    Path(PathArgs),
    /// Apply the DIF decision rules to a fit or path.
    Dif(DifArgs),
    /// Expected-score curves from a fit.
    Icc(IccArgs),
    /// Simulate case or count data from known parameters.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    #[arg(long)]
    pub cases: PathBuf,
    /// Count CSV to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Treat missing responses as an extra top category.
    #[arg(long)]
    pub missing_as_category: bool,
    /// Response value marking a missing case, besides an empty field.
    #[arg(long, default_value = "NA")]
    pub missing_token: String,
    /// Number of substantive categories (default: largest response + 1).
    #[arg(long)]
    pub categories: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Lambda,
    LogLambda,
}

impl From<ScaleArg> for DiscriminationScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Lambda => DiscriminationScale::Lambda,
            ScaleArg::LogLambda => DiscriminationScale::LogLambda,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmptyCellsArg {
    Error,
    MergeAdjacent,
    AddHalf,
}

impl From<EmptyCellsArg> for EmptyCellPolicy {
    fn from(e: EmptyCellsArg) -> Self {
        match e {
            EmptyCellsArg::Error => EmptyCellPolicy::Error,
            EmptyCellsArg::MergeAdjacent => EmptyCellPolicy::MergeAdjacent,
            EmptyCellsArg::AddHalf => EmptyCellPolicy::AddHalf,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Ridge,
    Lasso,
    Alignment,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Ridge => PenaltyKind::Ridge,
            PenaltyArg::Lasso => PenaltyKind::Lasso,
            PenaltyArg::Alignment => PenaltyKind::Alignment,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub counts: PathBuf,
    /// `sum-to-zero` or `reference:<group label>`.
    #[arg(long, default_value = "sum-to-zero")]
    pub identification: String,
    /// Smoothing constant for the lasso and alignment penalties.
    #[arg(long, default_value_t = hetop::penalty::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Scale on which discriminations are penalized.
    #[arg(long, value_enum, default_value = "lambda")]
    pub discrimination_scale: ScaleArg,
    #[arg(long, value_enum, default_value = "error")]
    pub empty_cells: EmptyCellsArg,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub gradient_tolerance: f64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Penalty kind; omit for an unpenalized fit.
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
    /// Inverse penalty strength (the penalty is divided by nu).
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Compute Hessian-based standard errors.
    #[arg(long)]
    pub se: bool,
    /// Level for the reported Wald intervals.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Fit JSON to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PathArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "alignment")]
    pub penalty: PenaltyArg,
    /// `log:<lo>:<hi>:<n>` or a comma-separated ascending list.
    #[arg(long, default_value = "log:1e-3:1e3:25")]
    pub nu_grid: String,
    /// Fit every nu from the default start, in parallel.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Path CSV to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Path JSON for later `dif --path`.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Latent-mean path SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Discrimination path SVG.
    #[arg(long)]
    pub lambda_plot: Option<PathBuf>,
    /// Penalty-proportion SVG for the elbow diagnostic.
    #[arg(long)]
    pub elbow_plot: Option<PathBuf>,
    #[command(flatten)]
    pub bounds: BoundArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    #[arg(long, default_value_t = hetop::dif::PUBLISHED_MEAN_BOUND)]
    pub mean_bound: f64,
    #[arg(long, default_value_t = 0.90)]
    pub disc_lower: f64,
    #[arg(long, default_value_t = 1.10)]
    pub disc_upper: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CombineArg {
    All,
    Any,
}

impl From<CombineArg> for CombineRule {
    fn from(c: CombineArg) -> Self {
        match c {
            CombineArg::All => CombineRule::All,
            CombineArg::Any => CombineRule::Any,
        }
    }
}

#[derive(Args, Debug)]
pub struct DifArgs {
    /// Fit JSON written by `fit`.
    #[arg(long, conflicts_with = "path", required_unless_present = "path")]
    pub fit: Option<PathBuf>,
    /// Path JSON written by `path --json`.
    #[arg(long)]
    pub path: Option<PathBuf>,
    #[command(flatten)]
    pub bounds: BoundArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// How bound and interval rules combine when standard errors exist.
    #[arg(long, value_enum, default_value = "all")]
    pub combine: CombineArg,
    /// Report JSON to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IccArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Comma-separated group labels (default: all groups).
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
    /// `<lo>:<hi>:<n>` evenly spaced ability values.
    #[arg(long, default_value = "-4:4:101")]
    pub theta: String,
    /// Curve CSV to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimFormat {
    Cases,
    Counts,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON with `mu`, `sigma`, `thresholds`, `group_sizes` and optional
    /// `group_labels`.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "counts")]
    pub format: SimFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Sidecar manifest or JSON output with an embedded manifest.
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Runs the tool on `argv` (including the program name) and returns the
/// exit code. Diagnostics go to standard error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(cli.command, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("hetop: {e}");
            e.exit_code()
        }
    }
}
