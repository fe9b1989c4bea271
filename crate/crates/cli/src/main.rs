//! `tdcgan`: synthesize corpora, train, enhance, evaluate and inspect models.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error, 4 numerical abort.

mod commands;
mod config;
mod failure;
mod manifest;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tdcgan_core::losses::PenaltyMode;

#[derive(Parser)]
#[command(name = "tdcgan", version, about = "Time-domain speech enhancement with a dilated convolutional GAN")]
struct Cli {
    /// Write the run manifest here instead of logging it.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired clean/noisy corpus.
    Synth(SynthArgs),
    /// Train a generator/critic pair on a corpus directory.
    Train(TrainArgs),
    /// Enhance a WAV file or every WAV file in a directory.
    Enhance(EnhanceArgs),
    /// Score a model on a corpus and write JSON and CSV reports.
    Evaluate(EvaluateArgs),
    /// Print shape ledger, receptive field and parameter counts.
    Inspect(InspectArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub clips: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SNR levels in dB, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15", allow_hyphen_values = true)]
    pub snr: Vec<f64>,
    /// Samples per clip.
    #[arg(long, default_value_t = 32768)]
    pub clip_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    Snr,
    L1,
}

impl From<PenaltyArg> for PenaltyMode {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Snr => PenaltyMode::Snr,
            PenaltyArg::L1 => PenaltyMode::L1,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, conflicts_with = "resume")]
    pub config: Option<PathBuf>,
    /// Corpus directory with clean/ and noisy/ subdirectories.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, conflicts_with = "resume")]
    pub penalty: Option<PenaltyArg>,
    #[arg(long, conflicts_with = "resume")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Log wall_ms = 0 so repeated runs produce identical logs.
    #[arg(long, conflicts_with = "resume")]
    pub strict: bool,
    /// Continue from a checkpoint; its configuration is used.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep going past files that fail; the exit code still reports the failure.
    #[arg(long)]
    pub continue_on_error: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "identity")]
    pub model: Option<PathBuf>,
    /// Evaluate the pass-through model instead of a checkpoint.
    #[arg(long, conflicts_with = "model")]
    pub identity: bool,
    /// Framing settings for --identity.
    #[arg(long, requires = "identity")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// JSON report path; the CSV table is written next to it with a .csv extension.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long, conflicts_with = "model")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let manifest = cli.manifest.as_deref();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a, manifest),
        Command::Train(a) => commands::train(&a, manifest),
        Command::Enhance(a) => commands::enhance(&a, manifest),
        Command::Evaluate(a) => commands::evaluate(&a, manifest),
        Command::Inspect(a) => commands::inspect(&a, manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.kind.exit_code()
        }
    }
}
