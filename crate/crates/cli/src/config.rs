use std::path::PathBuf;

use mrf_explain::{BpConfig, EnumConfig, Error, GraphKind, Method, Result, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::args::{default_methods, Command, Format, Kind, RunArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Infer,
    Explain,
    Baseline,
    Eval,
    Bench,
    Generate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    AllUniformPriorNodes,
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub graph: PathBuf,
    pub priors: PathBuf,
    pub potentials: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSuite {
    pub instances: usize,
    /// Instance `i` uses seed `model.seed + i`.
    pub model: SyntheticConfig,
}

/// Fully explicit description of one run. Written as `config.json` next to
/// the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub inputs: Option<Inputs>,
    pub synthetic: Option<SyntheticSuite>,
    pub targets: Targets,
    pub enumeration: EnumConfig,
    pub bp: BpConfig,
    pub methods: Vec<Method>,
    pub samples: usize,
    pub seed: u64,
    pub fraction: f64,
    pub fractions: Vec<f64>,
    pub d_values: Vec<usize>,
    pub out: PathBuf,
    pub format: Format,
    pub workers: usize,
}

fn invalid(subject: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        subject: subject.into(),
        message: message.into(),
    }
}

fn parse_bound(raw: &str, subject: &str) -> Result<Option<usize>> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "inf" | "none" | "unbounded" => Ok(None),
        s => s
            .parse()
            .map(Some)
            .map_err(|_| invalid(subject, format!("`{raw}` is not a count or `inf`"))),
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, subject: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| invalid(subject, format!("cannot parse `{s}`"))))
        .collect()
}

impl RunConfig {
    pub fn resolve(command: &Command, args: &RunArgs) -> Result<Self> {
        let subcommand = match command {
            Command::Infer(_) => Subcommand::Infer,
            Command::Explain(_) => Subcommand::Explain,
            Command::Baseline(_) => Subcommand::Baseline,
            Command::Eval(_) => Subcommand::Eval,
            Command::Bench(_) => Subcommand::Bench,
            Command::Generate(_) => Subcommand::Generate,
            Command::Rerun { .. } => return Err(invalid("subcommand", "rerun has no run arguments")),
        };
        let inputs = match (&args.graph, &args.priors, &args.potentials) {
            (Some(g), Some(p), Some(q)) => Some(Inputs {
                graph: g.clone(),
                priors: p.clone(),
                potentials: q.clone(),
            }),
            (None, None, None) => None,
            _ => return Err(invalid("inputs", "--graph, --priors and --potentials go together")),
        };
        let s = &args.synthetic;
        let synthetic = match (&inputs, s.synthetic) {
            (Some(_), Some(_)) => return Err(invalid("inputs", "give input files or --synthetic, not both")),
            (None, None) if subcommand == Subcommand::Generate => Some(1),
            (None, None) => return Err(invalid("inputs", "give --graph/--priors/--potentials or --synthetic N")),
            (_, n) => n,
        }
        .map(|instances| SyntheticSuite {
            instances,
            model: SyntheticConfig {
                graph: match s.kind {
                    Kind::Tree => GraphKind::Tree,
                    Kind::ErdosRenyi => GraphKind::ErdosRenyi {
                        mean_degree: s.mean_degree,
                    },
                    Kind::SmallWorld => GraphKind::SmallWorld {
                        neighbors: s.neighbors,
                        rewire: s.rewire,
                    },
                },
                nodes: s.nodes,
                classes: s.classes,
                homophily: s.homophily,
                biased_prior_fraction: s.biased_fraction,
                bias_strength: s.bias_strength,
                seed: args.seed,
            },
        });
        let targets = if args.targets.trim() == "all-uniform-prior-nodes" {
            Targets::AllUniformPriorNodes
        } else {
            Targets::List(parse_list(&args.targets, "targets")?)
        };
        let methods = match &args.method {
            Some(m) => parse_list(m, "method")?,
            None => default_methods(command),
        };
        let d_values = match &args.d_values {
            Some(d) => parse_list(d, "d values")?,
            None => Vec::new(),
        };
        let workers = match args.workers {
            Some(0) => return Err(invalid("workers", "must be at least 1")),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let config = RunConfig {
            subcommand,
            inputs,
            synthetic,
            targets,
            enumeration: EnumConfig::new(
                parse_bound(&args.max_distance, "max distance")?,
                parse_bound(&args.max_complexity, "max complexity")?,
            ),
            bp: BpConfig {
                tolerance: args.bp_tol,
                max_iterations: args.bp_max_iters,
                damping: args.damping,
            },
            methods,
            samples: args.samples,
            seed: args.seed,
            fraction: args.fraction,
            fractions: parse_list(&args.fractions, "fractions")?,
            d_values,
            out: args.out.clone(),
            format: args.format,
            workers,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.enumeration.validate()?;
        self.bp.validate()?;
        if let Some(s) = &self.synthetic {
            s.model.validate()?;
            if s.instances == 0 {
                return Err(invalid("synthetic", "need at least one instance"));
            }
        }
        if self.methods.is_empty() {
            return Err(invalid("method", "no method given"));
        }
        if self.subcommand == Subcommand::Baseline && self.methods.len() != 1 {
            return Err(invalid("method", "baseline takes exactly one method"));
        }
        if self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        mrf_explain::EvalConfig {
            restore_fraction: self.fraction,
            fractions: self.fractions.clone(),
        }
        .validate()?;
        if self.d_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("d values", "must be strictly ascending"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        Ok(())
    }
}
