//! Command-line workflow: ingest data, train, impute or predict, run
//! benchmark sweeps, and reproduce the component ablation table.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bigan",
    version,
    about = "Time-series imputation and prediction with a bidirectional recurrent adversarial model",
    after_long_help = config_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn config_help() -> String {
    config::keys_help()
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum IngestFormat {
    /// UCI air-quality CSV (semicolons, decimal commas, -200 sentinel).
    AirQuality,
    /// Long format: sample_id,time,feature,value with a header row.
    LongCsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    All,
    Train,
    Validation,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepKind {
    /// Imputation setting across deletion rates 0.1..0.5.
    Missing,
    /// Prediction setting across observation windows 4, 6, 8, 10.
    Windows,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw CSV into the binary dataset container.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: IngestFormat,
        #[arg(long)]
        out: PathBuf,
        /// Target feature name (long-csv only; defaults to the first).
        #[arg(long)]
        target: Option<String>,
    },
    /// Train a model and write a checkpoint plus an epoch log.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomly delete observed target cells, fill everything, score.
    Impute {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Fraction of observed target cells to hold out.
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Samples to run on; defaults to test when the data has one.
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
    },
    /// Hold out everything past the observation window, fill, score.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Observed prefix length; later target cells are held out.
        #[arg(long, default_value_t = 4)]
        obs_len: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
    },
    /// Compare imputers across a sweep; one CSV per cell plus a table.
    Benchmark {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: bigan,mean,knn,mice,interp.
        #[arg(long, value_delimiter = ',')]
        imputers: Vec<String>,
        #[arg(long, value_enum)]
        sweep: SweepKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate the five model variants under both settings.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { input, format, out, target } => match format {
            IngestFormat::AirQuality => commands::ingest::run_air_quality(&input, &out),
            IngestFormat::LongCsv => commands::ingest::run_long_csv(&input, &out, target.as_deref()),
        },
        Command::Train { data, config, out } => commands::train::run(&data, &config, &out),
        Command::Impute { checkpoint, data, rate, seed, out, split } => {
            commands::impute::run_imputation(&checkpoint, &data, rate, seed, &out, split)
        }
        Command::Predict { checkpoint, data, obs_len, seed, out, split } => {
            commands::impute::run_prediction(&checkpoint, &data, obs_len, seed, &out, split)
        }
        Command::Benchmark { data, config, imputers, sweep, out } => {
            commands::benchmark::run(&data, &config, &imputers, sweep, &out)
        }
        Command::Ablate { data, config, out } => commands::ablate::run(&data, &config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 usage/config, 3 data, 4 numerical divergence.
fn exit_code(err: &anyhow::Error) -> u8 {
    use bigan_core::Error as CoreError;
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Divergence(_) => 4,
                CoreError::Config(_) => 2,
                _ => 3,
            };
        }
    }
    if err.to_string().contains("config key") {
        2
    } else {
        3
    }
}
