//! `reportable-triage`: corpus synthesis, dataset construction, baseline
//! training, two-tier triage and evaluation.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime or transport error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use triage_core::cascade::Gating;
use triage_core::preprocess::PipelineVariant;
use triage_core::Task;

#[derive(Debug, Parser)]
#[command(name = "reportable-triage", version, about = "Two-tier pathology report triage")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: config `out_dir`, else `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for randomized commands; required unless the config sets one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reject unknown fields in corpus records.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Split a corpus and undersample its training portion.
    BuildDataset(BuildDatasetArgs),
    /// Train a hashed-feature logistic baseline for one tier member.
    TrainBaseline(TrainArgs),
    /// Run the two-tier cascade over a corpus.
    Triage(TriageArgs),
    /// Score triage outcomes against gold labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.21)]
    pub cancer_frac: f64,
    #[arg(long, default_value_t = 0.8)]
    pub reportable_frac: f64,
    /// Probability that a class-indicative slot carries class vocabulary.
    #[arg(long, default_value_t = 0.9)]
    pub signal: f64,
    /// Output file (default: `{out}/corpus.jsonl`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Labeled corpus (default: config `corpus`).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub tier: Task,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub tier: Task,
    /// Pipeline variant: A (synoptic first) or B (diagnosis first).
    #[arg(long)]
    pub variant: PipelineVariant,
    /// Training file (default: `{out}/datasets/{tier}/train.jsonl`).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Model output (default: the configured member model path).
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TriageArgs {
    /// Corpus to triage (default: config `corpus`).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// `predicted` runs tier 2 on tier-1 positives; `gold` also on gold cancers.
    #[arg(long, default_value = "predicted")]
    pub gating: Gating,
    /// Outcome file (default: `{out}/outcomes.jsonl`).
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub outcomes: PathBuf,
    /// Corpus holding the gold labels.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub tier: Task,
    /// Defaults to the gating recorded in the outcomes.
    #[arg(long)]
    pub gating: Option<Gating>,
}

/// An error with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub const VALIDATION: u8 = 1;
    pub const RUNTIME: u8 = 2;

    pub fn validation(msg: impl fmt::Display) -> Self {
        CliError {
            code: Self::VALIDATION,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError {
            code: Self::RUNTIME,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl From<triage_core::Error> for CliError {
    fn from(e: triage_core::Error) -> Self {
        let code = if e.is_runtime() {
            Self::RUNTIME
        } else {
            Self::VALIDATION
        };
        CliError { code, error: e.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
