use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mpsa", version, about = "Mixtures of principal subspace analyzers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset and its generating model.
    Generate(GenerateArgs),
    /// Fit a mixture to a CSV dataset.
    Fit(FitArgs),
    /// Assign samples to the components of a fitted model.
    Cluster(ClusterArgs),
    /// Denoise a grayscale PGM image with a patch mixture prior.
    Denoise(DenoiseArgs),
    /// Run a built-in benchmark suite.
    Benchmark(BenchmarkArgs),
}

/// Fitting options shared by the subcommands that fit models. Each flag
/// overrides the `[fit]` table of the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct FitOptions {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Penalty weight: a nonnegative number or "bic" for ln(n)/2.
    #[arg(long)]
    pub alpha: Option<String>,
    /// hierarchical, relative, bottom-up, top-down or fixed.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Component compositions: "full", "spherical" (or "p"), or
    /// compositions such as "1,9;1,2,7;1,2,4,3" (one for all components, or
    /// one per component).
    #[arg(long)]
    pub types: Option<String>,
    /// Relative diagonal loading of every scatter matrix.
    #[arg(long)]
    pub reg_eps: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative improvement below which the fit stops.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML dataset specification.
    pub spec: PathBuf,
    /// Output CSV with columns x1..xp,label.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth model document; defaults to the output path with the
    /// extension `truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV; a `label` column, if present, is not used as a feature.
    pub data: PathBuf,
    /// Number of components.
    #[arg(short = 'c', long)]
    pub components: Option<usize>,
    /// Seed the responsibilities from the `label` column and run one
    /// iteration.
    #[arg(long)]
    pub supervised: bool,
    /// Output model document.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitOptions,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Input CSV.
    pub data: PathBuf,
    /// Fitted model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV with one 1-based `label` per input row.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV with a reference `label` column; defaults to the `label` column
    /// of the input when present. The adjusted Rand index is printed.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Input PGM image (P2 or P5).
    pub input: PathBuf,
    /// Output PGM image.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report; printed to standard output when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Clean reference image for PSNR.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Treat the input as clean and add Gaussian noise of this standard
    /// deviation (pixel range [0, 1]) before denoising.
    #[arg(long, value_name = "SIGMA")]
    pub add_noise: Option<f64>,
    /// Where to save the noisy image produced by --add-noise.
    #[arg(long)]
    pub noisy_out: Option<PathBuf>,
    /// Known noise standard deviation (pixel range [0, 1]).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Use the known noise level instead of estimating it; requires --sigma.
    #[arg(long)]
    pub supervised: bool,
    /// Patch side length.
    #[arg(short = 's', long)]
    pub patch_size: Option<usize>,
    #[arg(short = 'c', long)]
    pub components: Option<usize>,
    /// mpsa, gmm-full, gmm-spherical or hdmi.
    #[arg(long)]
    pub method: Option<String>,
    /// CSV with the origin, most likely component and its parameter count
    /// for every patch.
    #[arg(long)]
    pub patch_map: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitOptions,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// mpsa10, mpsa100, full10, full100, skew100, clustering-mpsa10,
    /// clustering-mpsa50, clustering-full10, denoise or csv.
    pub suite: String,
    /// Independent datasets per suite (folds for the csv suite).
    #[arg(short = 'r', long)]
    pub repetitions: Option<usize>,
    /// Labeled CSV for the csv suite.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Components for the csv suite; defaults to the number of classes.
    #[arg(short = 'c', long)]
    pub components: Option<usize>,
    /// Comma-separated subset of mpsa-h, mpsa-r, mpsa-u, mpsa-d, gmm-f,
    /// gmm-s.
    #[arg(long)]
    pub models: Option<String>,
    /// Output CSV with one row per model.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitOptions,
}
