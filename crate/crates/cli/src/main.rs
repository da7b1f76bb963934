//! `lcmicp`: ingest recordings, train and apply the conformal detector, and
//! reproduce the evaluation tables and figures.

mod commands;
mod config;
mod failure;
mod manifest;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "lcmicp", version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Aggregate raw recordings into one dataset per aggregation kind.
    Ingest(IngestArgs),
    /// Train the forest, score the calibration set and save the model.
    Train(TrainArgs),
    /// Compute p-values, prediction sets and forced predictions.
    Predict(PredictArgs),
    /// Re-run an evaluation table or figure.
    Reproduce(ReproduceArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Ingest(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Predict(a) => Some(&a.out),
            Command::Reproduce(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out_dir(&mut self, out: PathBuf) {
        match self {
            Command::Ingest(a) => a.out = out,
            Command::Train(a) => a.out = out,
            Command::Predict(a) => a.out = out,
            Command::Reproduce(a) => a.out = out,
            Command::Replay(_) => {}
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Recordings CSV (`app_id,label,phase,tick,<features>`).
    #[arg(long)]
    pub recordings: PathBuf,
    /// Feature schema, one name per line; defaults to the built-in list.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Labelled dataset CSV (`id,label,<features>`).
    #[arg(long)]
    pub dataset: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV; the label column may be empty.
    #[arg(long)]
    pub instances: PathBuf,
    /// Significance levels of the reported prediction sets.
    #[arg(long, num_args = 1.., action = clap::ArgAction::Append)]
    pub delta: Vec<f64>,
    /// Flag instances whose malicious p-value exceeds this threshold.
    #[arg(long)]
    pub threshold_malicious_p: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Artifact {
    Table2,
    Table3,
    Table4,
    Table5,
    Table6,
    Table7,
    Fig1,
    Fig2,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub artifact: Artifact,
    /// Directory of `ingest` outputs, or a recordings CSV.
    #[arg(long, required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Feature schema for a recordings CSV given as `--data`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Use two generated Gaussian classes instead of real data.
    #[arg(long, conflicts_with = "data")]
    pub synthetic: bool,
    /// Malicious share of the training set in percent.
    #[arg(long, value_parser = ["25", "10"])]
    pub imbalance: Option<String>,
    /// Restrict tables to one aggregation kind (figures default to MeanDiff).
    #[arg(long)]
    pub feature_set: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// `manifest.json` written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::invariant(format!("thread pool: {e}")))?;
    }
    commands::dispatch(cli.command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
