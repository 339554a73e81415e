//! `ponwatch`: simulate PON traces, build datasets, train and evaluate the
//! classifiers, and monitor traces against a reference.

mod commands;
mod stamp;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ponwatch", version, about = "OTDR-based fault monitoring for passive optical networks")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Config override, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[arg(long, global = true)]
    pub pnr_min: Option<f64>,

    #[arg(long, global = true)]
    pub pnr_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Network,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Network-dependent GRU classifier.
    Branch,
    /// Generic model A: reflection count, positions and levels.
    A,
    /// Generic model B: event class and locations.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a trace of the configured network and scenario (`fault.<id>` keys).
    Simulate {
        /// Add noise at this peak-to-noise ratio in dB.
        #[arg(long)]
        pnr: Option<f64>,
        /// Emit the whole acquisition in dB instead of the normalized monitor region.
        #[arg(long)]
        full: bool,
    },
    /// Generate a labeled dataset.
    GenDataset {
        #[arg(long, value_enum)]
        kind: DatasetKind,
        /// Records per class (network datasets).
        #[arg(long)]
        per_class: Option<usize>,
        /// Total records after balancing (generic datasets).
        #[arg(long)]
        target: Option<usize>,
        /// Also write a CSV export.
        #[arg(long)]
        csv: bool,
    },
    /// Train a model on a dataset.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "f64")]
        precision: Precision,
    },
    /// Evaluate a checkpoint on the test split of a dataset.
    Eval {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Diagnose a trace against the healthy reference of the configured network.
    Monitor {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Relative level drop that marks a reflection degraded (model A).
        #[arg(long)]
        threshold: Option<f64>,
        /// Measured trace CSV; simulated from the config scenario when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// PNR of the simulated measurement in dB.
        #[arg(long, default_value_t = 25.0)]
        pnr: f64,
        /// Build the reference from model-A predictions instead of simulation ground truth.
        #[arg(long)]
        blind_reference: Option<PathBuf>,
    },
    /// Summarize evaluation metrics found in a directory.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("PONWATCH_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("PONWATCH_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("PONWATCH_THREADS must be a positive integer, got `{v}`");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::run(&cli));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
