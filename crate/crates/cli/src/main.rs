mod cmd;
mod data;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use adarc_core::climax::Method;
use adarc_core::features::Block;
use adarc_core::synth::SynthKind;
use adarc_core::Task;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "adarc", version, about = "Climax and sentiment analysis for video ads")]
struct Cli {
    /// Seed for splits, initialization and synthetic data (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with training settings; keys match the training config fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for `extract` (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress and summary output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-frame audio, shot and flow signals.
    Extract(ExtractArgs),
    /// Predict climax seconds (or sentiment scores from a sentiment checkpoint).
    Predict(PredictArgs),
    /// Train an LSTM on one cross-validation fold.
    Train(TrainArgs),
    /// Score predictions against annotations.
    Evaluate(EvaluateArgs),
    /// Write per-second signal series as CSV for plotting.
    EmitPlots(EmitPlotsArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Y4M video of a single video.
    #[arg(long, requires = "audio", conflicts_with = "data_dir")]
    pub video: Option<PathBuf>,
    /// WAV audio matching --video.
    #[arg(long, requires = "video")]
    pub audio: Option<PathBuf>,
    /// Id written to the signals file; defaults to the video file stem.
    #[arg(long, requires = "video")]
    pub video_id: Option<String>,
    /// Process every `video/<id>.y4m` with its `audio/<id>.wav`.
    #[arg(long, required_unless_present = "video")]
    pub data_dir: Option<PathBuf>,
    /// Signals JSONL; defaults to `<data-dir>/signals.jsonl`.
    #[arg(long, required_unless_present = "data_dir")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub signals: PathBuf,
    /// Semantic features, needed by the lstm method.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, required_if_eq("method", "lstm"))]
    pub checkpoint: Option<PathBuf>,
    /// Climax model feeding the climax column of a sentiment checkpoint.
    #[arg(long)]
    pub climax_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Output directory for the checkpoint, log and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Climax model whose probabilities become an extra sentiment input.
    #[arg(long)]
    pub climax_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    /// Comma-separated feature blocks, e.g. `flow,shots,audio`.
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<Block>>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub task: Task,
    /// Predictions JSONL (climax) or scores JSONL (sentiment).
    #[arg(long, required_unless_present = "checkpoint", conflicts_with = "checkpoint")]
    pub predictions: Option<PathBuf>,
    /// Score a checkpoint on the videos of --data-dir instead.
    #[arg(long, requires = "data_dir")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub climax_checkpoint: Option<PathBuf>,
    /// Defaults to `<data-dir>/annotations.jsonl`.
    #[arg(long, required_unless_present = "data_dir")]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Restrict a checkpoint evaluation to one split of this fold.
    #[arg(long, requires = "checkpoint")]
    pub fold: Option<usize>,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    pub split: SplitName,
    /// Report JSON; a text table is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EmitPlotsArgs {
    #[arg(long)]
    pub signals: PathBuf,
    /// Adds the climax probability column.
    #[arg(long, requires = "features")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Directory receiving one `<video_id>.csv` per video.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

/// Settings shared by every subcommand.
pub struct Globals {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub quiet: bool,
}

impl Globals {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::input("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    let g = Globals {
        seed: cli.seed,
        config: cli.config,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Extract(a) => cmd::extract::run(&g, a),
        Command::Predict(a) => cmd::predict::run(&g, a),
        Command::Train(a) => cmd::train::run(&g, a),
        Command::Evaluate(a) => cmd::evaluate::run(&g, a),
        Command::EmitPlots(a) => cmd::plots::run(&g, a),
        Command::Synth(a) => cmd::synth::run(&g, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
