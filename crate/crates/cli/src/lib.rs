//! Command-line front end: dataset ingestion, experiment orchestration and
//! report output for the `hashba` binary.

pub mod blender;
mod commands;
mod error;
pub mod fsio;
pub mod png;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HASHBA_OUT";

#[derive(Debug, Parser)]
#[command(name = "hashba", version, about = "Joint pose and hash-grid field optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jointly optimize camera poses and a radiance field.
    Train(TrainArgs),
    /// Render novel views from a checkpoint.
    Render(RenderArgs),
    /// Print pose and image quality metrics.
    Eval(EvalArgs),
    /// Recover planar patch warps on a single image.
    Homography(HomographyArgs),
    /// Write a procedural blob scene in the transforms-JSON layout.
    MakeToyScene(ToySceneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-scale settings for real bounded and unbounded captures.
    Full,
    /// Small grids and a 2000-iteration budget for 64x64 toy scenes.
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContractionArg {
    Aabb,
    InvertedSphere,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file; keys mirror the training config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable), applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Coarse-to-fine mode: off, vanilla or substitution.
    #[arg(long)]
    pub c2f: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory containing transforms_train.json.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "aabb")]
    pub contraction: ContractionArg,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Save a checkpoint every N iterations (0 saves only at the end).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Output directory; defaults to $HASHBA_OUT, then ./hashba-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Pose file (6 se(3) parameters or a 3x4 matrix per line).
    #[arg(long)]
    pub poses: PathBuf,
    /// Take the camera from this dataset's training manifest.
    #[arg(long, conflicts_with_all = ["width", "height", "fov_x"])]
    pub data: Option<PathBuf>,
    #[arg(long, requires_all = ["height", "fov_x"])]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Horizontal field of view in radians.
    #[arg(long)]
    pub fov_x: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Estimated training poses to compare against the manifest.
    #[arg(long, required_unless_present = "checkpoint")]
    pub poses: Option<PathBuf>,
    /// Checkpoint whose poses and renders are evaluated.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HomographyArgs {
    /// Source image; a procedural 256x256 image is used when absent.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ToySceneArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub views: usize,
    #[arg(long, default_value_t = 4)]
    pub test_views: usize,
    #[arg(long, default_value_t = 64)]
    pub size: u32,
    #[arg(long, default_value_t = 12)]
    pub blobs: usize,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
