use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mrf_explain::Method;

#[derive(Debug, Parser)]
#[command(name = "mrf-explain", version, about = "Belief propagation and Shapley explanations on pairwise MRFs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run BP and write every node's belief.
    Infer(RunArgs),
    /// Shapley attribution of each target's belief.
    Explain(RunArgs),
    /// Rank explaining variables with a baseline method.
    Baseline(RunArgs),
    /// Masked-prior fidelity of several methods over a fraction sweep.
    Eval(RunArgs),
    /// Adaptive vs scratch BP work, plus an optional distance sweep.
    Bench(RunArgs),
    /// Write a synthetic model as graph/priors/potentials files.
    Generate(RunArgs),
    /// Repeat a run from the config.json it wrote.
    Rerun {
        #[arg(long)]
        config: PathBuf,
        /// Write outputs here instead of the recorded directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Tree,
    ErdosRenyi,
    SmallWorld,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub priors: Option<PathBuf>,
    #[arg(long)]
    pub potentials: Option<PathBuf>,
    /// Comma-separated node ids, or `all-uniform-prior-nodes`.
    #[arg(long, default_value = "all-uniform-prior-nodes")]
    pub targets: String,
    /// Maximum search distance D (`inf` for unbounded).
    #[arg(long, default_value = "3")]
    pub max_distance: String,
    /// Maximum coalition complexity C in edges (`inf` for unbounded).
    #[arg(long, default_value = "8")]
    pub max_complexity: String,
    #[arg(long, default_value_t = 1e-6)]
    pub bp_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub bp_max_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    /// Method(s), comma-separated. `baseline` takes one, `eval` several.
    #[arg(long)]
    pub method: Option<String>,
    /// MC-sampling sample count.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restore fraction for the distance sweep.
    #[arg(long, default_value_t = 0.25)]
    pub fraction: f64,
    #[arg(long, default_value = "0.05,0.1,0.25,0.5,0.75,1")]
    pub fractions: String,
    /// Distances for the bench distance sweep, comma-separated.
    #[arg(long)]
    pub d_values: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

/// Synthetic models, used when no input files are given.
#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// Number of seeded synthetic instances (seeds `seed..seed+n`).
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, value_enum, default_value_t = Kind::ErdosRenyi)]
    pub kind: Kind,
    #[arg(long, default_value_t = 50)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.9)]
    pub homophily: f64,
    #[arg(long, default_value_t = 0.8)]
    pub biased_fraction: f64,
    #[arg(long, default_value_t = 0.9)]
    pub bias_strength: f64,
    #[arg(long, default_value_t = 3.0)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 4)]
    pub neighbors: usize,
    #[arg(long, default_value_t = 0.1)]
    pub rewire: f64,
}

pub fn default_methods(command: &Command) -> Vec<Method> {
    match command {
        Command::Eval(_) => Method::ALL.to_vec(),
        Command::Baseline(_) => vec![Method::Random],
        _ => vec![Method::Shapley],
    }
}
