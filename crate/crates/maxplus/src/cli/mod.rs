//! The `maxplus` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
//! fault (including a failed gradient check or approximation).

mod commands;
mod config;
mod data;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{apply_entry, config_entries, parse_config_text, TrainArgs};
pub use data::{DataArgs, Split, Splits};
pub use manifest::RunManifest;

use crate::io::IoError;

#[derive(Debug, Parser)]
#[command(name = "maxplus", version, about = "Train, prune and inspect max-plus block classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write model.mxpl, metrics.csv and manifest.txt.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Start from the conv trunk of this model file (cnn architectures).
        #[arg(long)]
        init_trunk: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the accuracy of a model on one split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Prune a max-plus head at one threshold.
    Prune {
        #[arg(long)]
        model: PathBuf,
        /// s in [0, 1]; 1 keeps only each class's argmax filter.
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        /// Skip the accuracy and agreement measurements (no dataset needed).
        #[arg(long)]
        no_eval: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Accuracy against retained filters over a grid of thresholds.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated thresholds.
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95,1")]
        grid: String,
        /// Extra reference models as NAME=MODEL_FILE (repeatable).
        #[arg(long)]
        baseline: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Final validation accuracy for every (seed, dropout ratio) pair.
    SeedStudy {
        /// Comma-separated seeds.
        #[arg(long, default_value = "1,2,3,4,5")]
        seeds: String,
        /// Comma-separated dropout ratios.
        #[arg(long, default_value = "0,0.5")]
        ratios: String,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write PGM images of the max-plus weights and the selected filters.
    Viz {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the two-output PWL block and compare it with the direct formula.
    Approx {
        #[arg(long, value_enum, default_value_t = PwlKind::Abs)]
        pwl: PwlKind,
        #[arg(long, default_value_t = 1000)]
        grid_steps: usize,
        /// Affine pieces per part (random only).
        #[arg(long, default_value_t = 4)]
        pieces: usize,
        /// Input dimension (random only).
        #[arg(long, default_value_t = 1)]
        inputs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// CSV of every evaluated point.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every finite-difference suite; exit 0 only if all pass.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PwlKind {
    Abs,
    Relu,
    Random,
}

/// A failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<maxplus_core::Error> for CliError {
    fn from(e: maxplus_core::Error) -> Self {
        use maxplus_core::Error as E;
        match e {
            E::NumericFault(_) => CliError::Numeric(e.to_string()),
            E::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Engine(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
