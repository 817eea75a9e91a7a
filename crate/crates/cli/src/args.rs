use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hfem", version, about = "Harmonic FEM inpainting: mask densification, tonal optimisation, decoding")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select mask pixels by error-guided densification and write a payload.
    Densify(DensifyArgs),
    /// Optimise the stored values of a payload for an image.
    Tonal(TonalArgs),
    /// Reconstruct an image from a payload.
    Decode(DecodeArgs),
    /// Time densification and tonal optimisation over several resolutions.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DensifyArgs {
    /// Input PGM (grey) or PPM (colour) image.
    #[arg(long)]
    pub input: PathBuf,
    /// Mask density as a fraction of the pixel count.
    #[arg(long, required_unless_present = "mask_count", conflicts_with = "mask_count")]
    pub density: Option<f64>,
    /// Exact number of mask pixels.
    #[arg(long)]
    pub mask_count: Option<usize>,
    /// Number of densification iterations.
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Number of unknown vertices (default: the mask count).
    #[arg(long)]
    pub unknowns: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Payload output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the reconstruction to this image.
    #[arg(long)]
    pub reconstruction: Option<PathBuf>,
    /// Write a JSON report here ("-" for stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TonalArgs {
    /// Original image the payload was made from.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub payload: PathBuf,
    /// Minimise the L1 instead of the squared error.
    #[arg(long)]
    pub l1: bool,
    /// Optimised payload output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub reconstruction: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub payload: PathBuf,
    /// Output PGM/PPM image.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Image to crop and shrink to each size (default: a synthetic image).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Square image sizes.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.04)]
    pub density: f64,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Time each size this many times and keep the fastest run.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Write a JSON report here ("-" for stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}
