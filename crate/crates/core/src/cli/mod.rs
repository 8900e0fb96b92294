//! Command-line interface. Stages exchange files so each can be rerun alone.

mod commands;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::imaging::Polarity;

pub use options::{parse_bins, parse_cutoffs, parse_noise_model, parse_roi};

#[derive(Debug, Parser)]
#[command(
    name = "defectrack",
    version,
    about = "Defect detection evaluation, sizing and tracking for in-situ microscopy"
)]
pub struct Cli {
    /// Calibration JSON; built-in defaults when absent.
    #[arg(long, global = true, env = "DEFECTRACK_CALIBRATION")]
    pub calibration: Option<PathBuf>,

    /// Worker threads for frame-parallel stages (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Increase log detail (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predicted boxes against ground truth over a sweep of IoU cutoffs.
    Evaluate(EvaluateArgs),
    /// Measure defect sizes by segmenting each detection box.
    Segment(SegmentArgs),
    /// Find defects without a trained detector (band-pass and centroid).
    Locate(LocateArgs),
    /// Link observations into trajectories.
    Track(TrackArgs),
    /// Density, size, growth and diffusion statistics from trajectories.
    Analyze(AnalyzeArgs),
    /// Write noise-corrupted copies of a frame directory.
    Noise(NoiseArgs),
    /// Convert a plain box CSV (no header block) into a ground-truth or
    /// detection file.
    Import(ImportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolarityArg {
    Dark,
    Bright,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Dark => Polarity::Dark,
            PolarityArg::Bright => Polarity::Bright,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseKind {
    Gaussian,
    Saltpepper,
    Poisson,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Detection file with predicted boxes.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth (or detection) file with reference boxes.
    #[arg(long)]
    pub truths: PathBuf,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.05:0.95:0.05")]
    pub cutoffs: String,
    /// Apply non-max suppression to predictions at this IoU first.
    #[arg(long)]
    pub nms_iou: Option<f64>,
    /// Metrics report; `.json` selects JSON.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Context pixels added around each box.
    #[arg(long, default_value_t = 4)]
    pub pad: usize,
    #[arg(long, value_enum, default_value = "dark")]
    pub polarity: PolarityArg,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Odd feature diameter in pixels.
    #[arg(long, default_value_t = 7)]
    pub diameter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = 64.0)]
    pub percentile: f64,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "dark")]
    pub polarity: PolarityArg,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Detection or ground-truth file, sized or not.
    #[arg(long)]
    pub detections: PathBuf,
    /// Receives trajectories.csv, drift.csv and summary.json.
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub search_range: f64,
    #[arg(long, default_value_t = 3)]
    pub memory: u32,
    /// Subtract the estimated collective drift from every position.
    #[arg(long)]
    pub drift_correct: bool,
    /// Largest subnetwork solved exhaustively.
    #[arg(long, default_value_t = 12)]
    pub max_subnet: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Closed region `x0:x1,y0:y1` in pixels.
    #[arg(long)]
    pub roi: Option<String>,
    /// Size histogram for D_eff, `lo:hi:count` in nm.
    #[arg(long, default_value = "2:18:50")]
    pub bins: String,
    /// Displacement lag in frames.
    #[arg(long, default_value_t = 1)]
    pub lag: u32,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub model: NoiseKind,
    /// `key=value` list: `variance=` (gaussian), `amount=,ratio=`
    /// (saltpepper), `peak=` (poisson).
    #[arg(long, default_value = "")]
    pub params: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// CSV with columns frame,x_min,y_min,x_max,y_max and, for detections,
    /// confidence.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Write a detection file instead of ground truth.
    #[arg(long)]
    pub detections: bool,
    /// Maxima are inclusive pixel indices; each pixel is a unit square.
    #[arg(long)]
    pub pixel_indices: bool,
    /// Detector name recorded in the header.
    #[arg(long)]
    pub detector: Option<String>,
}

/// A flag value rejected after parsing; exits like a command-line error.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    commands::dispatch(cli)
}

/// Process entry point: exit status 0 on success, 1 on a fatal error, 2 on
/// a usage error.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
