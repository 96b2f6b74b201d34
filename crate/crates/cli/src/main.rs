//! `symmpi`: benchmark runner and prediction-set tools over CSV inputs.

mod commands;
mod config;
mod error;
mod output;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "symmpi", version, about = "Prediction sets for data with distributional symmetry")]
pub struct Cli {
    /// Seed for every random choice; reruns with the same seed give identical files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Result file; written to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Result format: csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// TOML file with global keys and one section per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the hierarchical simulation benchmark.
    Bench(BenchArgs),
    /// Prediction set for the missing response of a hierarchical CSV.
    PredictHierarchical(HierarchicalArgs),
    /// Prediction set for the missing value of a graph vertex.
    PredictGraph(GraphArgs),
    /// Prediction region for a new point of a rotation-invariant cloud.
    PredictRotation(RotationArgs),
    /// Check a builtin map for distributional equivariance.
    TestEquivariance(EquivarianceArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// table1, table2, random-n-unsup or random-n-sup.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Test points per trial.
    #[arg(long)]
    pub tests: Option<usize>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub branches: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    /// raw or branch-sd.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Also write a long-format CSV for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HierarchicalArgs {
    /// CSV with columns branch_id, [x...,] y; the target row has an empty y.
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// unsup or sup.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Number of candidate values.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Allow branches of different sizes.
    #[arg(long)]
    pub random_sizes: bool,
    /// branch-sd or raw.
    #[arg(long)]
    pub scale: Option<String>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// CSV with columns vertex_id, value; the target has an empty value.
    pub values: Option<PathBuf>,
    /// Dense adjacency CSV.
    #[arg(long, conflicts_with = "edges")]
    pub adjacency: Option<PathBuf>,
    /// Edge list with lines `u v [weight]`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Automorphism generators, one permutation per line.
    #[arg(long)]
    pub generators: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// last or orbit-deviation.
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Largest automorphism group to enumerate.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RotationArgs {
    /// Numeric CSV, one point per row.
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte Carlo draws of (point, rotation).
    #[arg(long)]
    pub mc: Option<usize>,
    /// Raster cells per axis (two-dimensional clouds only).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Raster half-width; defaults to 1.5 times the largest norm.
    #[arg(long)]
    pub extent: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EquivarianceArgs {
    /// identity, sort, median-deviation, hier-unsup or hier-proxy.
    #[arg(long)]
    pub map: Option<String>,
    /// block (branch and within-branch permutations) or symmetric.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    panic::set_hook(Box::new(|_| {}));
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| commands::run(cli)));
    let result = outcome.unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unexpected failure".into());
        Err(CliError::Internal(msg))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("symmpi: {e}");
            e.code()
        }
    }
}
