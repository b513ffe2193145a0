//! `pusmi`: experiments for SMI estimation, representation learning and
//! independence testing from positive-unlabeled data.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::GeneratorKind;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<pusmi_core::Error> for CliError {
    fn from(e: pusmi_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pusmi",
    version,
    about = "Mutual information from positive-unlabeled data"
)]
pub struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for reports and tables.
    #[arg(long, global = true, default_value = "pusmi-out")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Class prior p(y = +1).
    #[arg(long, global = true)]
    pub prior: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Labeled corpus (.libsvm/.svm/.txt or .csv).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "input")]
    pub generator: Option<GeneratorKind>,
    #[arg(long)]
    pub n_p: Option<usize>,
    #[arg(long)]
    pub n_u: Option<usize>,
    /// Class prior of the sampled population (defaults to --prior).
    #[arg(long)]
    pub sample_prior: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AxisKind {
    Positive,
    Unlabeled,
    Joint,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate SMI from one PU sample.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Squared error of the estimate across sample sizes.
    Fig1Sweep {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "input")]
        generator: Option<GeneratorKind>,
        #[arg(long, value_enum)]
        axis: Option<AxisKind>,
        /// Size held fixed (or unlabeled-per-positive ratio for the joint axis).
        #[arg(long)]
        fixed: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Linear representation on the two-dimensional toy mixture, against PCA.
    PurlToy {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        n_p: Option<usize>,
        #[arg(long)]
        n_u: Option<usize>,
    },
    /// Train a representation network on PU data.
    PurlTrain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        validation_n_p: Option<usize>,
        #[arg(long)]
        validation_n_u: Option<usize>,
    },
    /// Permutation test of feature-label independence.
    Puit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        b_count: Option<usize>,
        /// Re-run cross-validation in every permutation round.
        #[arg(long)]
        recv_per_round: bool,
    },
    /// Type-II error frequency of the test over a grid of sample sizes.
    Type2Sweep {
        #[arg(long, value_enum)]
        generator: Option<GeneratorKind>,
        #[arg(long, value_delimiter = ',')]
        n_p_grid: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        n_u_grid: Option<Vec<usize>>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        b_count: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("pusmi: configuration error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pusmi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
