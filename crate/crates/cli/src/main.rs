//! `ich`: generate synthetic wafer maps, run iterative cluster harvesting
//! or one-time clustering, and evaluate or inspect the results.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ich_core::{IchError, Metric};

#[derive(Parser, Debug)]
#[command(name = "ich", version, about = "Iterative cluster harvesting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic wafer-map dataset.
    Generate(GenerateArgs),
    /// Cluster a feature file with ICH or one-time clustering.
    Run(RunArgs),
    /// Score an assignment CSV against the labels of a feature file.
    Evaluate(EvaluateArgs),
    /// Histograms of leading components and per-cluster mean images.
    Report(ReportArgs),
    /// ICH against one-time baselines at the same cluster count.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Per-class counts, e.g. `Center=40,Ring=40`.
    #[arg(long)]
    pub classes: String,
    #[arg(long, default_value_t = ich_core::synthgen::DEFAULT_SIZE)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ich,
    Otc,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct HarvestFlags {
    #[arg(long, default_value_t = 20)]
    pub n_pca: usize,
    #[arg(long = "n-clusters", default_value_t = 15)]
    pub n_c: usize,
    #[arg(long, default_value_t = 5)]
    pub n_min: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub silhouette_metric: MetricArg,
    /// pca, svd or none.
    #[arg(long, default_value = "pca")]
    pub dimred: String,
    /// ward or kmeans.
    #[arg(long, default_value = "ward")]
    pub cluster: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub method: Method,
    /// Feature file (binary or CSV).
    pub input: PathBuf,
    #[command(flatten)]
    pub flags: HarvestFlags,
    /// Attach rest and small samples to the nearest surviving cluster.
    #[arg(long)]
    pub full_assign: bool,
    /// Store every iteration's projection model in the outcome.
    #[arg(long)]
    pub trace: bool,
    /// Number of clusters for `otc` (defaults to --n-clusters).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// CSV with `sample_id,cluster_id[,assigned_stage]`.
    pub assignments: PathBuf,
    /// Labeled feature file.
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Outcome JSON written by `run`.
    pub outcome: PathBuf,
    pub features: PathBuf,
    #[arg(long, default_value_t = ich_core::report::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Labeled feature file.
    pub input: PathBuf,
    #[command(flatten)]
    pub flags: HarvestFlags,
    /// Alternative representation of the same samples for a PCA+AC row.
    #[arg(long)]
    pub pixels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), IchError> {
    let Ok(value) = std::env::var("ICH_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            IchError::InvalidConfig(format!(
                "ICH_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| IchError::InvalidConfig(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Run(a) => commands::run(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Report(a) => commands::report(&a),
        Command::Compare(a) => commands::compare(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
