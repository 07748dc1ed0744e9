//! Command-line front end for ordinal tensor decomposition.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliResult;

#[derive(Parser)]
#[command(
    name = "ordtensor",
    version,
    about = "Low-rank estimation of signal tensors from ordinal observations",
    after_help = "Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that runs the estimator.
#[derive(Args, Debug, Clone)]
struct FitFlags {
    /// Entrywise bound on the signal tensor.
    #[arg(long)]
    alpha: f64,
    /// Link family: probit or logistic.
    #[arg(long, default_value = "probit")]
    link: String,
    /// Link scale.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of ordinal levels; defaults to the input file's declaration.
    #[arg(long)]
    levels: Option<usize>,
    /// Jointly estimate the cut-off points.
    #[arg(long)]
    estimate_cutoffs: bool,
    /// Initial cut-offs as a comma-separated list (default: evenly spaced).
    #[arg(long)]
    cutoffs: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    #[arg(long, default_value_t = 5)]
    inner_steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Initialization: hosvd or random.
    #[arg(long, default_value = "hosvd")]
    init: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a signal tensor and quantized observations from a config.
    Simulate {
        /// JSON config (dims, rank, alpha, link, levels, sampling, seed).
        #[arg(long)]
        config: PathBuf,
        /// Directory for the truth/observed/manifest files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Fit the ordinal model to an observed tensor file.
    Fit {
        /// Observed ordinal tensor (JSON).
        input: PathBuf,
        /// Tucker rank, e.g. 2,2,2.
        #[arg(long)]
        rank: String,
        #[command(flatten)]
        flags: FitFlags,
        /// Output fit-result file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit every rank in a grid and select the BIC minimizer.
    RankSelect {
        input: PathBuf,
        /// Semicolon-separated ranks, e.g. 1,1,1;2,2,2;3,3,3.
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        flags: FitFlags,
        /// Output CSV (rank, objective, p_e, bic), sorted by BIC.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified K-fold cross-validation of held-out label prediction.
    Cv {
        input: PathBuf,
        #[arg(long)]
        rank: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Independent repetitions of the whole fold split.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Prediction rule: mode or median.
        #[arg(long, default_value = "mode")]
        rule: String,
        #[command(flatten)]
        flags: FitFlags,
        /// Output CSV with per-fold and summary rows.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict a label tensor from a stored fit result.
    Predict {
        /// Fit-result file produced by `fit`.
        input: PathBuf,
        /// Prediction rule: mode or median.
        #[arg(long, default_value = "mode")]
        rule: String,
        /// Output label tensor (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one axis (d, alpha, rho, levels) over seeded replicates.
    Experiment {
        /// JSON config with axis, values, replicates, base parameters.
        #[arg(long)]
        config: PathBuf,
    },
}

fn run() -> CliResult<()> {
    match Cli::parse().command {
        Command::Simulate { config, out_dir } => commands::simulate::run(&config, &out_dir),
        Command::Fit {
            input,
            rank,
            flags,
            out,
        } => commands::fit::run(&input, &rank, &flags, &out),
        Command::RankSelect {
            input,
            grid,
            flags,
            out,
        } => commands::rank_select::run(&input, &grid, &flags, &out),
        Command::Cv {
            input,
            rank,
            folds,
            runs,
            rule,
            flags,
            out,
        } => commands::cv::run(&input, &rank, folds, runs, &rule, &flags, &out),
        Command::Predict { input, rule, out } => commands::predict::run(&input, &rule, &out),
        Command::Experiment { config } => commands::experiment::run(&config),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
