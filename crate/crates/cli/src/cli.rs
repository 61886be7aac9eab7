use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neuroalign::align::ProjectorMode;
use neuroalign::encoders::Arch;

#[derive(Debug, Parser)]
#[command(name = "neuroalign", version, about = "Align neural recordings with image embeddings and probe layer depth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic manifest, neural file and layer banks.
    Synth(SynthArgs),
    /// Train one alignment model against a single bank.
    Train(TrainArgs),
    /// Train and evaluate one model per layer bank.
    Sweep(SweepArgs),
    /// Zero-shot retrieval metrics for a checkpoint.
    Eval(EvalArgs),
    /// Summary table (and optional scaling regression) from sweep results.
    Report(ReportArgs),
    /// Write projected neural and image embeddings as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub concepts: usize,
    #[arg(long, default_value_t = 200)]
    pub test_concepts: usize,
    #[arg(long, default_value_t = 10)]
    pub images_per: usize,
    #[arg(long, default_value_t = 6)]
    pub layers: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long, default_value_t = 16)]
    pub time_points: usize,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Detail weight of the final layer; anything but 0 is rejected.
    #[arg(long, default_value_t = 0.0)]
    pub final_detail: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Training hyperparameters: a JSON config file, then flag overrides.
#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// JSON file with any subset of the training config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub shared_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_arch)]
    pub arch: Option<Arch>,
    #[arg(long, value_parser = parse_projector)]
    pub projector: Option<ProjectorMode>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_arch(s: &str) -> Result<Arch, String> {
    s.parse().map_err(|e: neuroalign::Error| e.to_string())
}

fn parse_projector(s: &str) -> Result<ProjectorMode, String> {
    s.parse().map_err(|e: neuroalign::Error| e.to_string())
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to the first subject in the manifest.
    #[arg(long)]
    pub subject: Option<String>,
    /// Z-score each channel over time before training and evaluation.
    #[arg(long)]
    pub zscore: bool,
}

#[derive(Debug, Args, Clone)]
pub struct BankArgs {
    /// Path to a NEB1 embedding bank.
    #[arg(long, required_unless_present = "layer")]
    pub bank: Option<PathBuf>,
    /// Layer index; picks the bank from the manifest, or checks `--bank`.
    #[arg(long)]
    pub layer: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bank: BankArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory of `*.neb` banks; defaults to the manifest's bank list.
    #[arg(long)]
    pub banks_dir: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write one checkpoint per layer.
    #[arg(long)]
    pub save_checkpoints: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Top1,
    Top5,
    Concept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bank: BankArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "top1,top5,concept")]
    pub metrics: Vec<Metric>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Table CSV files or sweep JSON files; repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    /// Fit accuracy against ln(parameter count) for both columns.
    #[arg(long)]
    pub regress: bool,
    /// `BACKBONE=COUNT` (e.g. `RN50=38M`) for sweep JSON inputs.
    #[arg(long = "params", value_name = "BACKBONE=COUNT")]
    pub params: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bank: BankArgs,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}
