//! Command-line driver: dataset generation, training, reconstruction,
//! interpolation, evaluation, the planning benchmark, timing benchmarks and
//! LVC conversion.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod files;
pub mod plot;

#[derive(Debug, Parser)]
#[command(name = "hofnet", version, about = "Point-set reconstruction with higher-order function networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic shape dataset.
    GenData(GenDataArgs),
    /// Train an encoder on a dataset directory.
    Train(TrainArgs),
    /// Reconstruct one shape as a point file.
    Reconstruct(ReconstructArgs),
    /// Blend two shapes by mixed composition or parameter averaging.
    Interpolate(InterpolateArgs),
    /// Chamfer and F1 of reconstructions against ground truth.
    Eval(EvalArgs),
    /// Path-planning benchmark on voxelized reconstructions.
    Plan(PlanArgs),
    /// Time the Chamfer backends.
    Bench(BenchArgs),
    /// Convert an LVC decoder into an equivalent mapping network.
    ConvertLvc(ConvertLvcArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 5)]
    pub count: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub gt_points: usize,
    #[arg(long, default_value_t = 32)]
    pub raster_side: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// key=value config file; keys not given keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set steps=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV log with header step,loss,chamfer_fwd,chamfer_bwd.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// SVG loss curve.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required_unless_present = "raster", conflicts_with = "raster")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Silhouette file instead of a dataset entry.
    #[arg(long)]
    pub raster: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n_points: usize,
    /// Power of the mapping; defaults to the trained k.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpMode {
    Compose,
    Param,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub a: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long, value_enum, default_value_t = InterpMode::Compose)]
    pub mode: InterpMode,
    /// Stage string such as `AB`; the leftmost stage is applied first.
    /// Defaults to the first half A and the rest B.
    #[arg(long)]
    pub plan: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated sample counts.
    #[arg(long, default_value = "1000,10000", value_delimiter = ',')]
    pub n_points: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// SVG of mean chamfer against sample count.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMetric {
    Chamfer,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchMetric::Chamfer)]
    pub metric: BenchMetric,
    #[arg(long, default_value = "1000,10000", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value = "kdtree,brute", value_delimiter = ',')]
    pub backend: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertLvcArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Comma-separated codeword values.
    #[arg(long, allow_hyphen_values = true)]
    pub codeword: String,
    /// Compare both decoders on random probes and report the max deviation.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 64)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the converted parameters as key=value text.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_threads() {
    if let Some(n) = std::env::var("HOFNET_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `argv` and runs the command. Returns 0 on success, 1 on a usage
/// error and 2 on a runtime failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{e}");
            eprintln!("{}", Cli::command().render_help());
            return 1;
        }
    };
    configure_threads();
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
