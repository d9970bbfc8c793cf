//! Seeded random homophily MRFs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::{CompatibilityMatrix, Distribution, Mrf};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Random recursive tree: node `i` attaches to a uniform earlier node.
    Tree,
    /// G(n, p) with `p = mean_degree / (n - 1)`.
    ErdosRenyi { mean_degree: f64 },
    /// Ring lattice with `neighbors` links per node, each rewired with
    /// probability `rewire`.
    SmallWorld { neighbors: usize, rewire: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub graph: GraphKind,
    pub nodes: usize,
    pub classes: usize,
    /// Diagonal of the shared potential.
    pub homophily: f64,
    /// Share of nodes with a class-biased prior; the rest are uniform.
    pub biased_prior_fraction: f64,
    /// Mass of a biased prior on its planted class.
    pub bias_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            graph: GraphKind::ErdosRenyi { mean_degree: 3.0 },
            nodes: 50,
            classes: 3,
            homophily: 0.9,
            biased_prior_fraction: 0.8,
            bias_strength: 0.9,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::validation("synthetic node count", "must be at least 2"));
        }
        if self.classes < 2 {
            return Err(Error::validation("synthetic class count", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::validation("homophily strength", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.biased_prior_fraction) {
            return Err(Error::validation("biased prior fraction", "must lie in [0, 1]"));
        }
        if !(self.bias_strength > 0.0 && self.bias_strength <= 1.0) {
            return Err(Error::validation("bias strength", "must lie in (0, 1]"));
        }
        match self.graph {
            GraphKind::Tree => {}
            GraphKind::ErdosRenyi { mean_degree } => {
                if !(mean_degree >= 0.0) {
                    return Err(Error::validation("mean degree", "must be non-negative"));
                }
            }
            GraphKind::SmallWorld { neighbors, rewire } => {
                if neighbors == 0 || neighbors % 2 == 1 || neighbors >= self.nodes {
                    return Err(Error::validation(
                        "small-world neighbors",
                        "must be even, positive, and below the node count",
                    ));
                }
                if !(0.0..=1.0).contains(&rewire) {
                    return Err(Error::validation("rewire probability", "must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

fn edges<R: Rng>(kind: GraphKind, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    match kind {
        GraphKind::Tree => (1..n).map(|i| (rng.gen_range(0..i), i)).collect(),
        GraphKind::ErdosRenyi { mean_degree } => {
            let p = (mean_degree / (n - 1) as f64).min(1.0);
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p {
                        out.push((i, j));
                    }
                }
            }
            out
        }
        GraphKind::SmallWorld { neighbors, rewire } => {
            let mut present: HashSet<(usize, usize)> = HashSet::new();
            let mut out = Vec::new();
            for i in 0..n {
                for k in 1..=neighbors / 2 {
                    let j = (i + k) % n;
                    present.insert((i.min(j), i.max(j)));
                    out.push((i, j));
                }
            }
            for slot in out.iter_mut() {
                if rng.gen::<f64>() >= rewire {
                    continue;
                }
                let (i, j) = *slot;
                let free: Vec<usize> = (0..n)
                    .filter(|&w| w != i && !present.contains(&(i.min(w), i.max(w))))
                    .collect();
                if let Some(&w) = free.choose(rng) {
                    present.remove(&(i.min(j), i.max(j)));
                    present.insert((i.min(w), i.max(w)));
                    *slot = (i, w);
                }
            }
            out
        }
    }
}

/// Random graph with a shared homophily potential and a mix of biased and
/// uniform priors. Identical configs give identical models.
pub fn generate_synthetic<T: Scalar>(config: &SyntheticConfig) -> Result<Mrf<T>> {
    config.validate()?;
    let (n, c) = (config.nodes, config.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let edge_list = edges(config.graph, n, &mut rng);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let biased = (config.biased_prior_fraction * n as f64).round() as usize;
    let rest = (1.0 - config.bias_strength) / (c - 1) as f64;

    let potential = CompatibilityMatrix::homophily(c, T::of(config.homophily))?;
    let mut builder = Mrf::builder(n, c).shared_potential(potential);
    for &node in &order[..biased] {
        let planted = rng.gen_range(0..c);
        let probs = (0..c)
            .map(|k| T::of(if k == planted { config.bias_strength } else { rest }))
            .collect();
        builder.set_prior(node, Distribution::from_weights(probs)?);
    }
    for (u, v) in edge_list {
        builder.add_edge(u, v, None);
    }
    builder.build()
}
