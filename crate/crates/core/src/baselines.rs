//! Competing explainers. Each produces a [`Ranking`] over the non-target
//! nodes so that all methods can be fed to the same fidelity protocol.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bp::{compute_belief, run_bp, run_bp_incremental, BpConfig, BpResult};
use crate::coalition::{admissible_nodes, Coalition, EnumConfig};
use crate::error::{Error, Result};
use crate::mrf::{Distribution, Mrf, NodeId};
use crate::scalar::Scalar;
use crate::shapley::{rank_by_score, symmetric_kl, CoalitionEvaluator, EvalMode, ExplanationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Shapley,
    Random,
    Pagerank,
    Sensitivity,
    McSampling,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Shapley,
        Method::Random,
        Method::Pagerank,
        Method::Sensitivity,
        Method::McSampling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Shapley => "shapley",
            Method::Random => "random",
            Method::Pagerank => "pagerank",
            Method::Sensitivity => "sensitivity",
            Method::McSampling => "mc_sampling",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "shapley" => Ok(Method::Shapley),
            "random" => Ok(Method::Random),
            "pagerank" => Ok(Method::Pagerank),
            "sensitivity" => Ok(Method::Sensitivity),
            "mc_sampling" | "mc" => Ok(Method::McSampling),
            other => Err(Error::validation("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Scores of the non-target nodes and their order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking<T> {
    pub target: NodeId,
    pub method: Method,
    pub seed: Option<u64>,
    /// `(node, score, coalition_count)` for every non-target node, in node
    /// order. The count is zero for methods that do not use coalitions.
    pub scores: Vec<(NodeId, T, usize)>,
    /// Descending score, ties by ascending id.
    pub order: Vec<NodeId>,
    /// Message updates spent producing the ranking.
    pub message_updates: u64,
}

impl<T: Scalar> Ranking<T> {
    fn from_scores(target: NodeId, method: Method, seed: Option<u64>, scores: Vec<(NodeId, T, usize)>) -> Self {
        let order = rank_by_score(scores.iter().map(|&(n, s, _)| (n, s)));
        Ranking {
            target,
            method,
            seed,
            scores,
            order,
            message_updates: 0,
        }
    }

    pub fn score(&self, node: NodeId) -> Option<T> {
        self.scores
            .binary_search_by_key(&node, |s| s.0)
            .ok()
            .map(|i| self.scores[i].1)
    }
}

impl<T: Scalar> From<&ExplanationResult<T>> for Ranking<T> {
    fn from(r: &ExplanationResult<T>) -> Self {
        Ranking {
            target: r.target,
            method: Method::Shapley,
            seed: None,
            scores: r
                .records
                .iter()
                .map(|a| (a.node, a.shapley_value, a.coalition_count))
                .collect(),
            order: r.ranking.clone(),
            message_updates: r.diagnostics.message_updates,
        }
    }
}

fn others<T: Scalar>(mrf: &Mrf<T>, target: NodeId) -> impl Iterator<Item = NodeId> + '_ {
    mrf.nodes().filter(move |&n| n != target)
}

/// I.i.d. uniform(0,1) scores.
pub fn random_ranking<T: Scalar>(mrf: &Mrf<T>, target: NodeId, seed: u64) -> Result<Ranking<T>> {
    mrf.check_node(target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = others(mrf, target)
        .map(|n| (n, T::of(rng.gen::<f64>()), 0))
        .collect();
    Ok(Ranking::from_scores(target, Method::Random, Some(seed), scores))
}

/// PageRank of every node by power iteration on the undirected random-walk
/// matrix with uniform teleport. Isolated nodes spread their mass uniformly.
/// Scores sum to one.
pub fn pagerank<T: Scalar>(mrf: &Mrf<T>, damping: f64, tol: f64, max_iterations: usize) -> Vec<f64> {
    let n = mrf.node_count();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iterations {
        let dangling: f64 = mrf
            .nodes()
            .filter(|&v| mrf.degree(v) == 0)
            .map(|v| rank[v.0])
            .sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for v in mrf.nodes() {
            let deg = mrf.degree(v);
            if deg == 0 {
                continue;
            }
            let share = damping * rank[v.0] / deg as f64;
            for &(u, _) in mrf.neighbors(v) {
                next[u.0] += share;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < tol {
            break;
        }
    }
    rank
}

/// Global PageRank, independent of the target (which is left out).
pub fn pagerank_ranking<T: Scalar>(mrf: &Mrf<T>, target: NodeId, damping: f64, tol: f64) -> Result<Ranking<T>> {
    mrf.check_node(target)?;
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::validation("pagerank damping", "must lie in [0, 1)"));
    }
    let pr = pagerank(mrf, damping, tol, 10_000);
    let scores = others(mrf, target).map(|n| (n, T::of(pr[n.0]), 0)).collect();
    Ok(Ranking::from_scores(target, Method::Pagerank, None, scores))
}

/// Symmetric KL between the target's belief and its belief after resetting
/// one node's prior to uniform, for every node.
pub fn sensitivity_ranking<T: Scalar>(mrf: &Mrf<T>, target: NodeId, bp_config: &BpConfig) -> Result<Ranking<T>> {
    let reference = run_bp(mrf, bp_config, None)?;
    sensitivity_ranking_with(mrf, target, bp_config, &reference)
}

/// As [`sensitivity_ranking`], reusing a converged full-graph BP run both as
/// the reference and as the warm start of every perturbed run.
pub fn sensitivity_ranking_with<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    bp_config: &BpConfig,
    reference: &BpResult<T>,
) -> Result<Ranking<T>> {
    mrf.check_node(target)?;
    let base = compute_belief(mrf, &reference.messages, target)?;
    let reachable = mrf.bfs_distances(target);
    let uniform = Distribution::uniform(mrf.class_count());
    let mut updates = 0;
    let mut scores = Vec::with_capacity(mrf.node_count());
    for node in others(mrf, target) {
        if mrf.prior(node).is_uniform() || reachable[node.0].is_none() {
            scores.push((node, T::zero(), 0));
            continue;
        }
        let perturbed = mrf.with_prior(node, uniform.clone())?;
        let run = run_bp_incremental(&perturbed.view(), bp_config, &reference.messages, &[node])
            .map_err(|e| e.tag_numerical(format!("perturbing node {node}")))?;
        updates += run.message_updates;
        let belief = compute_belief(&perturbed, &run.messages, target)?;
        scores.push((node, symmetric_kl(&base, &belief)?, 0));
    }
    let mut ranking = Ranking::from_scores(target, Method::Sensitivity, None, scores);
    ranking.message_updates = updates;
    Ok(ranking)
}

/// Grows a random tree from the target: at each step one frontier edge
/// (inside the distance ball, leading to a new node) is chosen uniformly.
/// Stops when the frontier is empty or the edge cap is reached.
pub fn sample_rooted_tree<T: Scalar, R: Rng>(
    mrf: &Mrf<T>,
    target: NodeId,
    config: &EnumConfig,
    admissible: &HashMap<NodeId, usize>,
    rng: &mut R,
) -> Result<Coalition> {
    let mut links: Vec<(NodeId, NodeId)> = Vec::new();
    let mut members = vec![target];
    while config.admits_growth(links.len()) {
        let frontier: Vec<(NodeId, NodeId)> = members
            .iter()
            .flat_map(|&v| mrf.neighbors(v).iter().map(move |&(u, _)| (v, u)))
            .filter(|(_, u)| admissible.contains_key(u) && !members.contains(u))
            .collect();
        let Some(&(v, u)) = frontier.choose(rng) else {
            break;
        };
        links.push((v, u));
        members.push(u);
    }
    Coalition::from_links(mrf, target, &links)
}

/// Shapley estimate from `num_samples` random rooted trees instead of the
/// full coalition enumeration. Each node's estimate is its mean marginal
/// contribution over the samples that contain it.
pub fn mc_sampling_shapley<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    enum_config: &EnumConfig,
    bp_config: &BpConfig,
    num_samples: usize,
    seed: u64,
) -> Result<Ranking<T>> {
    let reference = run_bp(mrf, bp_config, None)?;
    mc_sampling_shapley_with(mrf, target, enum_config, bp_config, num_samples, seed, &reference)
}

pub fn mc_sampling_shapley_with<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    enum_config: &EnumConfig,
    bp_config: &BpConfig,
    num_samples: usize,
    seed: u64,
    reference: &BpResult<T>,
) -> Result<Ranking<T>> {
    mrf.check_node(target)?;
    enum_config.validate()?;
    if num_samples == 0 {
        return Err(Error::validation("sample count", "must be at least 1"));
    }
    let reference_belief = compute_belief(mrf, &reference.messages, target)?;
    let mut evaluator = CoalitionEvaluator::new(mrf, target, reference_belief, *bp_config, EvalMode::Adaptive)?;
    let admissible = admissible_nodes(mrf, target, enum_config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals: HashMap<NodeId, (T, usize)> = HashMap::new();
    for _ in 0..num_samples {
        let tree = sample_rooted_tree(mrf, target, enum_config, &admissible, &mut rng)?;
        if tree.is_target_only() {
            break;
        }
        for (node, mu) in evaluator.contributions(&tree)? {
            let slot = totals.entry(node).or_insert((T::zero(), 0));
            slot.0 = slot.0 + mu;
            slot.1 += 1;
        }
    }
    let scores = others(mrf, target)
        .map(|n| match totals.get(&n) {
            Some(&(sum, count)) => (n, sum / T::of(count as f64), count),
            None => (n, T::zero(), 0),
        })
        .collect();
    let mut ranking = Ranking::from_scores(target, Method::McSampling, Some(seed), scores);
    ranking.message_updates = evaluator.stats().message_updates;
    Ok(ranking)
}
