mod commands;
mod csvio;
mod error;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Repair anomalies in labeled time series.
#[derive(Debug, Parser)]
#[command(name = "imr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Repair a series and print a JSON report.
    Repair(RepairArgs),
    /// Inject synthetic errors and sample labels from a clean series.
    Inject(InjectArgs),
    /// RMS error between a truth file and a repair file.
    Evaluate(EvaluateArgs),
    /// Run a benchmark scenario and write one row per method, error length and repetition.
    Bench(BenchArgs),
    /// Repair a labeled-prefix stream point by point with the closed-form order-1 model.
    Stream(StreamArgs),
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// imr, imr-static, ar, arx, ewma, sma or online.
    #[arg(long, default_value = "imr")]
    pub method: String,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long = "max-iter", default_value_t = imr_core::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    /// full, pruned or incremental.
    #[arg(long, default_value = "incremental")]
    pub backend: String,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Fixed coefficients for arx and imr-static, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub phi: Option<Vec<f64>>,
    /// Tolerance for the multi-segment online solver.
    #[arg(long = "fixpoint-tol", default_value_t = 1e-10)]
    pub fixpoint_tol: f64,
    /// Include the per-iteration parameter trace in the report.
    #[arg(long)]
    pub trace: bool,
    /// Write the per-iteration change trace as CSV.
    #[arg(long = "trace-out")]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// shift, innovational or spike.
    #[arg(long, default_value = "shift")]
    pub kind: String,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub amount: f64,
    #[arg(long, default_value_t = 0.1)]
    pub variance: f64,
    /// 1-based first index of an error window; repeat for several windows.
    #[arg(long)]
    pub start: Vec<usize>,
    #[arg(long = "len", default_value_t = 1)]
    pub length: usize,
    #[arg(long, default_value_t = imr_core::evalkit::DEFAULT_DECAY)]
    pub decay: f64,
    /// Labeling rate in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    /// uniform or prefix.
    #[arg(long = "label-mode", default_value = "uniform")]
    pub label_mode: String,
    #[arg(long, env = "IMR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub repair: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, env = "IMR_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// CSV with index,value,label; `-` reads standard input.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// `-` writes standard output.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Repair(a) => commands::repair(a),
        Command::Inject(a) => commands::inject(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Stream(a) => commands::stream(a),
    };
    match result {
        Ok(report) => {
            if let Some(report) = report {
                println!("{report}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
