//! Shapley attribution of a target's belief to the other variables.
//!
//! The value of a coalition `S` is `ν(S) = −KL(b‖b̃) − KL(b̃‖b)`, where `b`
//! is the target's belief on the full graph and `b̃` its belief when BP runs
//! on `S` alone. A variable's contribution to `S` is `ν(S) − ν(S \ {X_i})`
//! and its attribution is the plain average of those contributions over
//! every enumerated coalition that contains it.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bp::{adaptive_bp, compute_belief, run_bp, run_bp_view, BpConfig, BpResult, MessageSet, MrfView};
use crate::coalition::{coalition_minus, enumerate_coalitions, CanonicalKey, Coalition, EnumConfig, Reduced};
use crate::error::{Error, Result};
use crate::mrf::{Distribution, EdgeId, Mrf, NodeId};
use crate::scalar::Scalar;

/// `KL(p‖q)` with both arguments clamped to `[LOG_FLOOR, 1]`.
pub fn kl_divergence<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Contract(format!(
            "distributions of length {} and {} cannot be compared",
            p.len(),
            q.len()
        )));
    }
    let clamp = |x: T| x.max(T::LOG_FLOOR).min(T::one());
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .map(|(&a, &b)| {
            let (a, b) = (clamp(a), clamp(b));
            a * (a.ln() - b.ln())
        })
        .sum())
}

/// `KL(p‖q) + KL(q‖p)`; never negative.
pub fn symmetric_kl<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    Ok(kl_divergence(p, q)? + kl_divergence(q, p)?)
}

/// Characteristic function `ν = −KL(b‖b̃) − KL(b̃‖b)`.
pub fn characteristic<T: Scalar>(reference: &Distribution<T>, approx: &Distribution<T>) -> Result<T> {
    Ok(-symmetric_kl(reference, approx)?)
}

/// How coalition beliefs are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Warm-start from the converged messages of a sub-coalition.
    Adaptive,
    /// Run BP from uniform messages on every coalition.
    Scratch,
}

#[derive(Debug, Clone)]
pub struct CachedValue<T> {
    pub belief: Distribution<T>,
    pub value: T,
}

/// Coalition values for one target, keyed by canonical edge set.
#[derive(Debug, Clone)]
pub struct CharacteristicCache<T> {
    reference: Distribution<T>,
    target_only: CachedValue<T>,
    entries: HashMap<CanonicalKey, CachedValue<T>>,
}

impl<T: Scalar> CharacteristicCache<T> {
    pub fn new(reference: Distribution<T>, target_prior: Distribution<T>) -> Result<Self> {
        let value = characteristic(&reference, &target_prior)?;
        Ok(CharacteristicCache {
            reference,
            target_only: CachedValue {
                belief: target_prior,
                value,
            },
            entries: HashMap::new(),
        })
    }

    pub fn reference(&self) -> &Distribution<T> {
        &self.reference
    }

    /// `ν` of the edgeless coalition, where the target's belief is its prior.
    pub fn target_only_value(&self) -> T {
        self.target_only.value
    }

    pub fn get(&self, key: &CanonicalKey) -> Option<&CachedValue<T>> {
        if key.as_bytes().is_empty() {
            Some(&self.target_only)
        } else {
            self.entries.get(key)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> BTreeMap<CanonicalKey, T> {
        self.entries.iter().map(|(k, v)| (k.clone(), v.value)).collect()
    }

    fn insert_belief(&mut self, key: CanonicalKey, belief: Distribution<T>) -> Result<T> {
        if let Some(hit) = self.entries.get(&key) {
            return Ok(hit.value);
        }
        let value = characteristic(&self.reference, &belief)?;
        self.entries.insert(key, CachedValue { belief, value });
        Ok(value)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub bp_runs: u64,
    pub message_updates: u64,
    /// Message updates spent on coalitions of each edge count (index = edges).
    pub updates_by_size: Vec<u64>,
    pub unconverged_runs: u64,
}

impl EvalStats {
    fn record<T>(&mut self, edges: usize, result: &BpResult<T>) {
        self.bp_runs += 1;
        self.message_updates += result.message_updates;
        if self.updates_by_size.len() <= edges {
            self.updates_by_size.resize(edges + 1, 0);
        }
        self.updates_by_size[edges] += result.message_updates;
        if !result.converged {
            self.unconverged_runs += 1;
        }
    }
}

struct Frame<T> {
    edge: EdgeId,
    messages: MessageSet<T>,
}

/// Evaluates `ν` on coalitions that arrive in DFS order, keeping the
/// converged messages of the current coalition's ancestors so that each new
/// coalition is one adaptive-BP step away from its parent.
pub struct CoalitionEvaluator<'m, T> {
    mrf: &'m Mrf<T>,
    target: NodeId,
    bp: BpConfig,
    mode: EvalMode,
    cache: CharacteristicCache<T>,
    stack: Vec<Frame<T>>,
    stats: EvalStats,
}

impl<'m, T: Scalar> CoalitionEvaluator<'m, T> {
    pub fn new(
        mrf: &'m Mrf<T>,
        target: NodeId,
        reference: Distribution<T>,
        bp: BpConfig,
        mode: EvalMode,
    ) -> Result<Self> {
        mrf.check_node(target)?;
        bp.validate()?;
        let cache = CharacteristicCache::new(reference, mrf.prior(target).clone())?;
        Ok(CoalitionEvaluator {
            mrf,
            target,
            bp,
            mode,
            cache,
            stack: Vec::new(),
            stats: EvalStats::default(),
        })
    }

    pub fn cache(&self) -> &CharacteristicCache<T> {
        &self.cache
    }

    pub fn stats(&self) -> &EvalStats {
        &self.stats
    }

    pub fn into_parts(self) -> (CharacteristicCache<T>, EvalStats) {
        (self.cache, self.stats)
    }

    fn run(
        &mut self,
        base_edges: &[EdgeId],
        base: Option<&MessageSet<T>>,
        link: (NodeId, NodeId),
    ) -> Result<MessageSet<T>> {
        let mrf = self.mrf;
        let result = match (self.mode, base) {
            (EvalMode::Adaptive, Some(msgs)) => {
                let view = MrfView::restricted(mrf, base_edges.iter().copied());
                adaptive_bp(&view, msgs, link, &self.bp)?.1
            }
            (EvalMode::Adaptive, None) => {
                let view = MrfView::restricted(mrf, []);
                adaptive_bp(&view, &MessageSet::new(), link, &self.bp)?.1
            }
            (EvalMode::Scratch, _) => {
                let edge = mrf
                    .find_edge(link.0, link.1)
                    .ok_or_else(|| Error::Contract(format!("({},{}) is not an edge", link.0, link.1)))?;
                let view = MrfView::restricted(mrf, base_edges.iter().copied().chain([edge]));
                run_bp_view(&view, &self.bp, None)?
            }
        };
        self.stats.record(base_edges.len() + 1, &result);
        Ok(result.messages)
    }

    fn belief(&self, messages: &MessageSet<T>) -> Result<Distribution<T>> {
        compute_belief(self.mrf, messages, self.target)
    }

    /// `ν(S)`. Brings `S` onto the ancestor stack, running adaptive BP for
    /// every prefix of `S` not already there.
    pub fn evaluate(&mut self, coalition: &Coalition) -> Result<T> {
        self.check_target(coalition)?;
        if coalition.is_target_only() {
            return Ok(self.cache.target_only_value());
        }
        self.load(coalition)
            .map_err(|e| e.tag_numerical(format!("coalition {}", coalition.key())))
    }

    fn check_target(&self, coalition: &Coalition) -> Result<()> {
        if coalition.target != self.target {
            return Err(Error::Contract(format!(
                "coalition of target {} handed to evaluator of target {}",
                coalition.target, self.target
            )));
        }
        Ok(())
    }

    fn load(&mut self, coalition: &Coalition) -> Result<T> {
        let shared = self
            .stack
            .iter()
            .zip(&coalition.edges)
            .take_while(|(f, &e)| f.edge == e)
            .count();
        self.stack.truncate(shared);
        let mut value = None;
        for i in shared..coalition.edges.len() {
            let edges: Vec<EdgeId> = self.stack.iter().map(|f| f.edge).collect();
            let parent = self.stack.last().map(|f| f.messages.clone());
            let messages = self.run(&edges, parent.as_ref(), coalition.links[i])?;
            let belief = self.belief(&messages)?;
            let key = CanonicalKey::from_pairs(coalition.links[..=i].iter().copied());
            value = Some(self.cache.insert_belief(key, belief)?);
            self.stack.push(Frame {
                edge: coalition.edges[i],
                messages,
            });
        }
        match value {
            Some(v) => Ok(v),
            None => self
                .cache
                .get(coalition.key())
                .map(|c| c.value)
                .ok_or_else(|| Error::Contract("coalition on the stack but not cached".into())),
        }
    }

    /// `ν` of a sub-coalition of the coalition currently on the stack. When
    /// uncached, BP starts from the largest stacked prefix contained in it.
    fn reduced_value(&mut self, reduced: &Coalition) -> Result<T> {
        if let Some(hit) = self.cache.get(reduced.key()) {
            return Ok(hit.value);
        }
        if self.mode == EvalMode::Adaptive {
            let mut edges = Vec::new();
            let reuse = self
                .stack
                .iter()
                .zip(&reduced.edges)
                .take_while(|(f, &e)| f.edge == e)
                .count();
            edges.extend(reduced.edges[..reuse].iter().copied());
            let mut messages = reuse.checked_sub(1).map(|i| self.stack[i].messages.clone());
            for i in reuse..reduced.edges.len() {
                let next = self.run(&edges, messages.as_ref(), reduced.links[i])?;
                edges.push(reduced.edges[i]);
                let belief = self.belief(&next)?;
                let key = CanonicalKey::from_pairs(reduced.links[..=i].iter().copied());
                self.cache.insert_belief(key, belief)?;
                messages = Some(next);
            }
        } else {
            let view = reduced.view(self.mrf);
            let result = run_bp_view(&view, &self.bp, None)?;
            self.stats.record(reduced.edges.len(), &result);
            let belief = self.belief(&result.messages)?;
            self.cache.insert_belief(reduced.key().clone(), belief)?;
        }
        self.cache
            .get(reduced.key())
            .map(|c| c.value)
            .ok_or_else(|| Error::Contract("reduced coalition missing after evaluation".into()))
    }

    /// `μ(X_i; X, S) = ν(S) − ν(S \ {X_i})`.
    pub fn marginal_contribution(&mut self, coalition: &Coalition, node: NodeId) -> Result<T> {
        let with = self.evaluate(coalition)?;
        let without = match coalition_minus(coalition, node)? {
            Reduced::TargetOnly => self.cache.target_only_value(),
            Reduced::Coalition(r) => self
                .reduced_value(&r)
                .map_err(|e| e.tag_numerical(format!("coalition {}", r.key())))?,
        };
        Ok(with - without)
    }

    /// Contributions of every explaining variable in `S`, in node order of `S`.
    pub fn contributions(&mut self, coalition: &Coalition) -> Result<Vec<(NodeId, T)>> {
        let target = self.target;
        coalition
            .nodes
            .iter()
            .filter(|&&n| n != target)
            .map(|&n| Ok((n, self.marginal_contribution(coalition, n)?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAttribution<T> {
    pub node: NodeId,
    pub shapley_value: T,
    pub coalition_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode: Option<EvalMode>,
    pub coalitions: usize,
    pub cached_values: usize,
    pub bp_runs: u64,
    pub message_updates: u64,
    pub updates_by_size: Vec<u64>,
    pub unconverged_runs: u64,
    pub reference_converged: bool,
    pub reference_iterations: usize,
    pub target_only_value: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationResult<T> {
    pub target: NodeId,
    /// One record per non-target node, in node order.
    pub records: Vec<NodeAttribution<T>>,
    /// Non-target nodes by descending value, ties by ascending id.
    pub ranking: Vec<NodeId>,
    pub diagnostics: Diagnostics,
    /// `ν` of every evaluated coalition, when requested.
    #[serde(skip)]
    pub values: Option<BTreeMap<CanonicalKey, T>>,
}

impl<T: Scalar> ExplanationResult<T> {
    pub fn record(&self, node: NodeId) -> Option<&NodeAttribution<T>> {
        self.records
            .binary_search_by_key(&node, |r| r.node)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn shapley_value(&self, node: NodeId) -> T {
        self.record(node).map_or(T::zero(), |r| r.shapley_value)
    }

    pub fn coalition_count(&self, node: NodeId) -> usize {
        self.record(node).map_or(0, |r| r.coalition_count)
    }
}

/// Orders nodes by descending score, ties by ascending id.
pub fn rank_by_score<T: Scalar>(scores: impl IntoIterator<Item = (NodeId, T)>) -> Vec<NodeId> {
    let mut v: Vec<(NodeId, T)> = scores.into_iter().collect();
    v.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    v.into_iter().map(|(n, _)| n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplainOptions {
    pub mode: EvalMode,
    pub keep_values: bool,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            mode: EvalMode::Adaptive,
            keep_values: false,
        }
    }
}

/// Explains targets of one MRF, sharing the full-graph BP run.
pub struct Explainer<'m, T: Clone> {
    mrf: &'m Mrf<T>,
    enum_config: EnumConfig,
    bp_config: BpConfig,
    reference: Cow<'m, BpResult<T>>,
}

impl<'m, T: Scalar> Explainer<'m, T> {
    pub fn new(mrf: &'m Mrf<T>, enum_config: EnumConfig, bp_config: BpConfig) -> Result<Self> {
        enum_config.validate()?;
        let reference = run_bp(mrf, &bp_config, None)?;
        Ok(Explainer {
            mrf,
            enum_config,
            bp_config,
            reference: Cow::Owned(reference),
        })
    }

    /// Reuses a full-graph BP run computed by the caller with `bp_config`.
    pub fn with_reference(
        mrf: &'m Mrf<T>,
        enum_config: EnumConfig,
        bp_config: BpConfig,
        reference: &'m BpResult<T>,
    ) -> Result<Self> {
        enum_config.validate()?;
        Ok(Explainer {
            mrf,
            enum_config,
            bp_config,
            reference: Cow::Borrowed(reference),
        })
    }

    pub fn mrf(&self) -> &'m Mrf<T> {
        self.mrf
    }

    pub fn reference(&self) -> &BpResult<T> {
        &self.reference
    }

    pub fn reference_belief(&self, target: NodeId) -> Result<Distribution<T>> {
        compute_belief(self.mrf, &self.reference.messages, target)
    }

    pub fn explain(&self, target: NodeId) -> Result<ExplanationResult<T>> {
        self.explain_with(target, ExplainOptions::default())
    }

    pub fn explain_with(&self, target: NodeId, options: ExplainOptions) -> Result<ExplanationResult<T>> {
        let started = Instant::now();
        self.mrf.check_node(target)?;
        let reference = self.reference_belief(target)?;
        let mut evaluator =
            CoalitionEvaluator::new(self.mrf, target, reference, self.bp_config, options.mode)?;
        let mut totals: HashMap<NodeId, (T, usize)> = HashMap::new();
        let visited = enumerate_coalitions(self.mrf, target, &self.enum_config, |coalition| {
            for (node, mu) in evaluator.contributions(coalition)? {
                let slot = totals.entry(node).or_insert((T::zero(), 0));
                slot.0 = slot.0 + mu;
                slot.1 += 1;
            }
            Ok(())
        })?;

        let records: Vec<NodeAttribution<T>> = self
            .mrf
            .nodes()
            .filter(|&n| n != target)
            .map(|node| match totals.get(&node) {
                Some(&(sum, count)) => NodeAttribution {
                    node,
                    shapley_value: sum / T::of(count as f64),
                    coalition_count: count,
                },
                None => NodeAttribution {
                    node,
                    shapley_value: T::zero(),
                    coalition_count: 0,
                },
            })
            .collect();
        let ranking = rank_by_score(records.iter().map(|r| (r.node, r.shapley_value)));
        let (cache, stats) = evaluator.into_parts();
        let diagnostics = Diagnostics {
            mode: Some(options.mode),
            coalitions: visited,
            cached_values: cache.len(),
            bp_runs: stats.bp_runs,
            message_updates: stats.message_updates,
            updates_by_size: stats.updates_by_size,
            unconverged_runs: stats.unconverged_runs,
            reference_converged: self.reference.converged,
            reference_iterations: self.reference.iterations_used,
            target_only_value: cache.target_only_value().as_f64(),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        Ok(ExplanationResult {
            target,
            records,
            ranking,
            diagnostics,
            values: options.keep_values.then(|| cache.values()),
        })
    }
}

/// Shapley attribution of `target`'s belief under the given bounds.
pub fn explain<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    enum_config: &EnumConfig,
    bp_config: &BpConfig,
) -> Result<ExplanationResult<T>> {
    Explainer::new(mrf, *enum_config, *bp_config)?.explain(target)
}
