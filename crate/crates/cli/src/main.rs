//! `fontsense` — detect font style, color and size in cropped text images,
//! and predict similar fonts from attribute datasets.
//!
//! Exit codes: 0 success, 2 bad arguments (from the parser), 3 unreadable or
//! invalid input, 4 detection/processing failure.

mod commands;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_BAD_INPUT: u8 = 3;
pub const EXIT_FAILURE: u8 = 4;

/// An error annotated with the exit code it should produce.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn bad_input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_BAD_INPUT, message: message.into() }
    }

    fn failure(message: impl Into<String>) -> Self {
        CliError { code: EXIT_FAILURE, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Structured,
}

#[derive(Parser)]
#[command(name = "fontsense", version, about = "Font detection and prediction toolkit")]
struct Cli {
    /// Report format for command output.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: ReportFormat,

    /// Seed for all randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print per-stage wall-clock timings to stderr.
    #[arg(long, global = true)]
    time: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect style, color and size of text in a PPM/PGM image.
    Detect(DetectArgs),
    /// Rank fonts similar to a query font from an attribute dataset.
    Predict(PredictArgs),
    /// Extend a seed attribute dataset to embedding-only fonts.
    Extend(ExtendArgs),
    /// Train the style network on a generated fixture set.
    Train(TrainArgs),
    /// Generate a deterministic fixture set (images + manifest).
    GenFixtures(GenFixturesArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Input image (binary PPM or PGM).
    #[arg(long)]
    image: String,
    /// Trained style model (FNET file).
    #[arg(long)]
    model: String,
    /// Style classes to report.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    /// Color clusters for the text-color detector.
    #[arg(long, default_value_t = fontsense_core::color::DEFAULT_K)]
    kmeans_k: usize,
    /// Edge threshold for the text-size detector, in (0, 255).
    #[arg(long, default_value_t = 30.0)]
    threshold: f64,
    /// Columns that must exceed the threshold for a row to count as an edge.
    #[arg(long, default_value_t = 2)]
    min_edge_pixels: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Query font name.
    #[arg(long)]
    query: String,
    /// Attribute dataset (CSV).
    #[arg(long)]
    dataset: String,
    /// Number of similar fonts to report.
    #[arg(long, default_value_t = 10)]
    top_n: usize,
}

#[derive(Args)]
struct ExtendArgs {
    /// Seed dataset with attributes and embeddings (CSV).
    #[arg(long)]
    seed_fonts: String,
    /// Embedding-only fonts to extend (CSV).
    #[arg(long)]
    new_fonts: String,
    /// Output dataset path (CSV).
    #[arg(long)]
    output: String,
    /// Neighbors per new font.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Neighbor weighting: distances shape the weights, or a constant
    /// 1/(k-1) for every neighbor.
    #[arg(long, value_enum, default_value = "inverse-distance")]
    weighting: WeightingArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    InverseDistance,
    Constant,
}

#[derive(Args)]
struct TrainArgs {
    /// Fixture directory produced by gen-fixtures.
    #[arg(long)]
    fixtures: String,
    /// Output model path (FNET file).
    #[arg(long)]
    output: String,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f32,
    #[arg(long, default_value_t = 0.9)]
    momentum: f32,
    /// Stop early once validation accuracy reaches this value.
    #[arg(long)]
    target_accuracy: Option<f64>,
}

#[derive(Args)]
struct GenFixturesArgs {
    /// Output directory.
    #[arg(long)]
    output: String,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    train_per_class: usize,
    #[arg(long, default_value_t = 50)]
    val_per_class: usize,
    /// Planted color-truth images.
    #[arg(long, default_value_t = 20)]
    color_samples: usize,
    /// Planted size-truth images.
    #[arg(long, default_value_t = 20)]
    size_samples: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect(args) => commands::detect(&cli, args),
        Command::Predict(args) => commands::predict(&cli, args),
        Command::Extend(args) => commands::extend(&cli, args),
        Command::Train(args) => commands::train(&cli, args),
        Command::GenFixtures(args) => commands::gen_fixtures(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
