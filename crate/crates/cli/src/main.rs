mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "scriptgen",
    version,
    about = "Styled handwriting generation toolkit"
)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    /// Defaults to 0, or to the config file's seed for `train`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with training and model settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (or report file for `evaluate`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic multi-writer word corpus.
    SynthData(SynthDataArgs),
    /// Train the generator and critics on a dataset split.
    Train(TrainArgs),
    /// Write words in the style of reference images.
    Generate(GenerateArgs),
    /// Trace which reference strokes the decoder attended to for one word.
    Ssaa(SsaaArgs),
    /// Score generated words against a dataset split.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
pub struct SynthDataArgs {
    #[arg(long)]
    pub writers: usize,
    /// One word per line.
    #[arg(long)]
    pub words: PathBuf,
    /// Optional held-out words, written to the test split.
    #[arg(long)]
    pub test_words: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Start from the built-in small-model preset instead of the full model.
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Load pretrained style-encoder weights (safetensors).
    #[arg(long)]
    pub style_weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, alias = "ckpt")]
    pub checkpoint: PathBuf,
    /// Directory of reference word images of one writer.
    #[arg(long)]
    pub style_dir: PathBuf,
    /// Words separated by whitespace; one image is written per word.
    #[arg(long)]
    pub text: String,
    /// Also write each word's attention container.
    #[arg(long)]
    pub attention: bool,
}

#[derive(Args, Debug)]
pub struct SsaaArgs {
    #[arg(long, alias = "ckpt")]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub style_dir: PathBuf,
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = 90.0)]
    pub percentile: f64,
    #[arg(long, default_value_t = 20)]
    pub min_area: usize,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, alias = "ckpt")]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "wcn")]
    pub extractor: String,
    #[arg(long, default_value_t = 100)]
    pub kid_subset_size: usize,
    #[arg(long, default_value_t = 100)]
    pub kid_subsets: usize,
    /// Precomputed features of the real split (tensor container); needs `--generated-features`.
    #[arg(long, requires = "generated_features")]
    pub real_features: Option<PathBuf>,
    #[arg(long, requires = "real_features")]
    pub generated_features: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = commands::run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
