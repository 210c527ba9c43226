//! `sgmm`: simulate, preprocess, fit, evaluate, diagnose and report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "sgmm", version, about = "Bayesian sparse Gaussian mixture clustering")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads for chains and restarts.
    #[arg(long, global = true, env = "SGMM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Turn a genes×cells count matrix into standardized expression.
    Preprocess(PreprocessArgs),
    /// Fit a model and write a run directory.
    Fit(FitArgs),
    /// Score an estimate against a ground truth.
    Evaluate(EvaluateArgs),
    /// Convergence diagnostics for sampler traces.
    Diagnose(DiagnoseArgs),
    /// Check a run directory and summarize it.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ScenarioKind {
    One,
    Two,
    Three,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario spec as JSON; the flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    /// True cluster count for scenario one.
    #[arg(long, default_value_t = 3)]
    pub k_star: usize,
    /// Support size for scenario one.
    #[arg(long, default_value_t = 6)]
    pub s: usize,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mean_scale: Option<f64>,
    /// Directory for data.csv, truth.json and scenario.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Count matrix, genes as rows.
    #[arg(long)]
    pub counts: PathBuf,
    /// The count file has cells as rows.
    #[arg(long)]
    pub transpose: bool,
    /// Genes with total count at or below this are dropped.
    #[arg(long, default_value_t = sparse_gmm::preprocess::DEFAULT_MIN_TOTAL)]
    pub min_total: f64,
    /// Output CSV, features×observations.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON listing the retained genes and cells.
    #[arg(long)]
    pub kept: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Bayesian,
    Cmle,
    Kmeans,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Experiment config as JSON; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Features×observations CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The data file has observations as rows.
    #[arg(long)]
    pub transpose: bool,
    /// Ground truth JSON, as written by `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Cluster count for cmle and kmeans.
    #[arg(long)]
    pub k: Option<usize>,
    /// Row-sparsity budget for cmle.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub burn: Option<usize>,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// estimate.json from a run directory.
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write the metrics here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Run directory written by `fit`.
    #[arg(long, conflicts_with_all = ["traces", "data"])]
    pub run: Option<PathBuf>,
    /// Trace files, one per chain.
    #[arg(long, num_args = 1.., requires = "data")]
    pub traces: Vec<PathBuf>,
    /// Dataset the traces were fitted to.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub transpose: bool,
    /// Also write the diagnostics here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directory written by `fit`.
    #[arg(long)]
    pub run: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        commands::set_threads(threads)?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Fit(a) => commands::fit(&a, cli.threads),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Report(a) => commands::report(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
