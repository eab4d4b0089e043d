//! `coincept` command-line front end.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coincept::Error;

#[derive(Debug, Parser)]
#[command(
    name = "coincept",
    version,
    about = "Contrastive time-series representation learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand that reads configuration.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML config file with [encoder], [train], [forecast], [classify],
    /// [anomaly], [toy] and [classes] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.iters=200`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Toy,
    Classes,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        /// Output file: wide CSV for `toy`, TSV train split for `classes`.
        #[arg(long)]
        out: PathBuf,
        /// Test split for `classes`.
        #[arg(long)]
        test_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        len: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write the wavelet-perturbed copy of a wide CSV.
    Perturb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Threshold fraction; defaults to `train.alpha_thresh`.
        #[arg(long)]
        alpha: Option<f64>,
        /// Timestamp column name (defaults to the first column).
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train an encoder and write a checkpoint.
    Train {
        /// Wide CSV stream or UCR-style TSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV file for the per-iteration loss.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Encode a dataset with a frozen checkpoint.
    Encode {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Ridge forecasting on last-step representations.
    EvalForecast {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Horizon(s); defaults to `forecast.horizon`. Repeatable.
        #[arg(long)]
        horizon: Vec<usize>,
        /// Directory for the per-horizon metrics CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// RBF kernel classification on pooled representations.
    EvalClassify {
        #[arg(long)]
        ckpt: PathBuf,
        /// Train split TSV.
        #[arg(long)]
        data: PathBuf,
        /// Test split TSV.
        #[arg(long)]
        test: PathBuf,
        /// Directory for the predictions CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Streaming anomaly detection against an `is_anomaly` column.
    EvalAnomaly {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for the per-step scores CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Alignment and uniformity of raw versus perturbed representations.
    Analyze {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Segment length when `--data` is a single stream.
        #[arg(long)]
        segment: Option<usize>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Directory for the pair-distance histogram CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print per-unit dilations, receptive fields and the parameter count.
    Inspect {
        /// Read the encoder config from a checkpoint instead.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericFailure(_) => 3,
        Error::ArtifactMismatch(_) | Error::UnsupportedVersion { .. } | Error::CorruptFile(_) => 4,
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Validation(_) | Error::Io { .. } => 2,
    }
}

fn init_threads() -> coincept::Result<()> {
    let Ok(raw) = std::env::var("COINCEPT_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::InvalidArgument(format!("COINCEPT_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|_| commands::run(cli.command));
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("json output"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
