use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exitcal_core::CbFactor;
use rust_decimal::Decimal;

#[derive(Debug, Parser)]
#[command(name = "exitcal", version, about = "Replay trades under exit rules and calibrate them by grid search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every record of a JSON-lines trade file.
    Validate { data: PathBuf },
    /// Replay the dataset under one configuration.
    Simulate(SimulateArgs),
    /// First-pass grid search.
    Grid(GridArgs),
    /// Second-pass refinement of the top first-pass configurations.
    Refine(RefineArgs),
    /// Summarize baseline, best pass-1, and best pass-2 results.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Baseline,
    Recommended,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::Recommended => "recommended",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OverlayPreset {
    Recommended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Chrono,
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub data: PathBuf,
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<Preset>,
    /// key = value file with exit and optional overlay fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Add the recommended ATR and circuit-breaker overlay to a preset.
    #[arg(long, requires = "preset")]
    pub overlay: Option<OverlayPreset>,
    #[arg(long, default_value_t = 1000.0)]
    pub notional: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    pub data: PathBuf,
    /// key = value file of comma-separated axis values.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Chrono)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Rank on every trade instead of the train partition.
    #[arg(long)]
    pub full_sample: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "EXITCAL_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub notional: f64,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value = "stop_loss")]
    pub heatmap_x: String,
    #[arg(long, default_value = "trail_activation")]
    pub heatmap_y: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    pub data: PathBuf,
    /// Output directory of a previous `grid` run.
    #[arg(long)]
    pub pass1_results: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, value_delimiter = ',')]
    pub atr_stop_mult: Option<Vec<Decimal>>,
    #[arg(long, value_delimiter = ',')]
    pub atr_tp_mult: Option<Vec<Decimal>>,
    #[arg(long, value_delimiter = ',')]
    pub cb_loss_threshold: Option<Vec<u32>>,
    /// Reduction factors; `disabled` turns the breaker off.
    #[arg(long, value_delimiter = ',')]
    pub cb_reduction_factor: Option<Vec<CbFactor>>,
    #[arg(long)]
    pub atr_period: Option<usize>,
    /// Defaults to the pass-1 notional.
    #[arg(long)]
    pub notional: Option<f64>,
    #[arg(long, env = "EXITCAL_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Defaults to `<pass1-results>/pass2`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of a `grid` run.
    pub dir: PathBuf,
    /// Defaults to `<dir>/pass2` when present.
    #[arg(long)]
    pub refine_dir: Option<PathBuf>,
    /// Where to write the report; defaults to `<dir>/report.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
