//! Loopy sum-product belief propagation.
//!
//! Messages are updated synchronously: every sweep computes new messages from
//! the previous sweep's values. A message is only recomputed when one of its
//! inputs changed during the previous sweep (or when it is stale at the
//! start), which is exactly equivalent to a full Jacobi sweep but lets warm
//! starts skip the parts of the graph that are already at their fixed point.
//! The number of recomputed messages is reported as `message_updates`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::{Distribution, EdgeId, Mrf, NodeId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    /// Largest per-entry message change still counted as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight kept from the previous message, in `[0, 1)`.
    pub damping: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            tolerance: 1e-6,
            max_iterations: 200,
            damping: 0.0,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::validation("bp tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("bp max_iterations", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::validation("bp damping", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Normalized messages keyed by directed edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MessageSet<T> {
    // keyed (to, from) so that the messages entering a node are contiguous
    by_target: BTreeMap<(NodeId, NodeId), Distribution<T>>,
}

impl<T: Scalar> MessageSet<T> {
    pub fn new() -> Self {
        MessageSet {
            by_target: BTreeMap::new(),
        }
    }

    /// The message `from → to`.
    pub fn get(&self, from: NodeId, to: NodeId) -> Option<&Distribution<T>> {
        self.by_target.get(&(to, from))
    }

    pub fn insert(&mut self, from: NodeId, to: NodeId, message: Distribution<T>) {
        self.by_target.insert((to, from), message);
    }

    pub fn len(&self) -> usize {
        self.by_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_target.is_empty()
    }

    /// Directed edges `(from, to)` in ascending `(from, to)` order.
    pub fn keys(&self) -> Vec<(NodeId, NodeId)> {
        let mut keys: Vec<_> = self.by_target.keys().map(|&(to, from)| (from, to)).collect();
        keys.sort_unstable();
        keys
    }

    /// Messages entering `node`, as `(from, message)`.
    pub fn incoming(&self, node: NodeId) -> impl Iterator<Item = (NodeId, &Distribution<T>)> {
        self.by_target
            .range((node, NodeId(0))..=(node, NodeId(usize::MAX)))
            .map(|(&(_, from), m)| (from, m))
    }
}

#[derive(Debug, Clone)]
pub struct BpResult<T> {
    pub messages: MessageSet<T>,
    pub converged: bool,
    pub iterations_used: usize,
    pub message_updates: u64,
    /// Largest per-entry change in the final sweep.
    pub final_change: f64,
}

/// An MRF restricted to a subset of its edges. The full graph is the view
/// with every edge active.
#[derive(Debug, Clone)]
pub struct MrfView<'a, T> {
    mrf: &'a Mrf<T>,
    edges: Option<Vec<EdgeId>>,
}

impl<'a, T: Scalar> MrfView<'a, T> {
    pub fn full(mrf: &'a Mrf<T>) -> Self {
        MrfView { mrf, edges: None }
    }

    pub fn restricted(mrf: &'a Mrf<T>, edges: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut edges: Vec<EdgeId> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        MrfView {
            mrf,
            edges: Some(edges),
        }
    }

    pub fn mrf(&self) -> &'a Mrf<T> {
        self.mrf
    }

    pub fn edge_ids(&self) -> Vec<EdgeId> {
        match &self.edges {
            Some(e) => e.clone(),
            None => (0..self.mrf.edge_count()).map(EdgeId).collect(),
        }
    }

    pub fn contains_edge(&self, edge: EdgeId) -> bool {
        match &self.edges {
            Some(e) => e.binary_search(&edge).is_ok(),
            None => edge.0 < self.mrf.edge_count(),
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        match &self.edges {
            Some(e) => e.iter().any(|&id| {
                let (a, b) = self.mrf.edge(id);
                a == node || b == node
            }),
            None => self.mrf.contains_node(node),
        }
    }

    pub fn with_edge(&self, edge: EdgeId) -> Self {
        let mut edges = self.edge_ids();
        if let Err(pos) = edges.binary_search(&edge) {
            edges.insert(pos, edge);
        }
        MrfView {
            mrf: self.mrf,
            edges: Some(edges),
        }
    }
}

impl<T: Scalar> Mrf<T> {
    pub fn view(&self) -> MrfView<'_, T> {
        MrfView::full(self)
    }
}

#[derive(Debug, Clone, Copy)]
struct Directed {
    from: NodeId,
    to: NodeId,
    edge: EdgeId,
}

/// Directed-edge dependency structure of one view.
struct Schedule {
    dirs: Vec<Directed>,
    /// `inputs[d]` for `d = j→i`: the messages `k→j`, `k ≠ i`.
    inputs: Vec<Vec<usize>>,
    /// `dependents[d]` for `d = j→i`: the messages `i→l`, `l ≠ j`.
    dependents: Vec<Vec<usize>>,
    /// No cycles among the view's edges.
    acyclic: bool,
}

impl Schedule {
    fn build<T: Scalar>(view: &MrfView<'_, T>) -> Self {
        let mrf = view.mrf();
        let mut dirs = Vec::new();
        for e in view.edge_ids() {
            let (a, b) = mrf.edge(e);
            dirs.push(Directed { from: a, to: b, edge: e });
            dirs.push(Directed { from: b, to: a, edge: e });
        }
        dirs.sort_unstable_by_key(|d| (d.from, d.to));

        let mut incoming: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (i, d) in dirs.iter().enumerate() {
            incoming.entry(d.to).or_default().push(i);
        }
        let inputs: Vec<Vec<usize>> = dirs
            .iter()
            .map(|d| {
                incoming
                    .get(&d.from)
                    .map(|list| list.iter().copied().filter(|&k| dirs[k].from != d.to).collect())
                    .unwrap_or_default()
            })
            .collect();
        let mut dependents = vec![Vec::new(); dirs.len()];
        for (d, ins) in inputs.iter().enumerate() {
            for &k in ins {
                dependents[k].push(d);
            }
        }
        Schedule {
            acyclic: is_forest(mrf.node_count(), view.edge_ids().into_iter().map(|e| mrf.edge(e))),
            dirs,
            inputs,
            dependents,
        }
    }
}

fn is_forest(n: usize, edges: impl Iterator<Item = (NodeId, NodeId)>) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (root(&mut parent, a.0), root(&mut parent, b.0));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// Sum-product BP on the whole graph.
///
/// On a forest without damping the tolerance is not used: messages settle
/// exactly after at most diameter + 1 sweeps, and the run stops only when no
/// message changes.
pub fn run_bp<T: Scalar>(
    mrf: &Mrf<T>,
    config: &BpConfig,
    warm_start: Option<&MessageSet<T>>,
) -> Result<BpResult<T>> {
    run_bp_view(&mrf.view(), config, warm_start)
}

/// Sum-product BP on a view. Warm-start messages seed the iteration; missing
/// ones start uniform. Every message is recomputed in the first sweep.
pub fn run_bp_view<T: Scalar>(
    view: &MrfView<'_, T>,
    config: &BpConfig,
    warm_start: Option<&MessageSet<T>>,
) -> Result<BpResult<T>> {
    config.validate()?;
    let schedule = Schedule::build(view);
    let (init, _) = seed(view, &schedule, warm_start)?;
    let dirty = vec![true; schedule.dirs.len()];
    propagate(view, config, &schedule, init, dirty)
}

/// BP from messages that are already a fixed point except around
/// `stale_nodes` (whose priors or incident edges changed) and around any
/// directed edge absent from `warm_start`. Only the affected messages are
/// recomputed in the first sweep.
pub fn run_bp_incremental<T: Scalar>(
    view: &MrfView<'_, T>,
    config: &BpConfig,
    warm_start: &MessageSet<T>,
    stale_nodes: &[NodeId],
) -> Result<BpResult<T>> {
    config.validate()?;
    let schedule = Schedule::build(view);
    let (init, missing) = seed(view, &schedule, Some(warm_start))?;
    let dirty = schedule
        .dirs
        .iter()
        .enumerate()
        .map(|(d, dir)| {
            missing[d]
                || stale_nodes.contains(&dir.from)
                || schedule.inputs[d].iter().any(|&k| missing[k])
        })
        .collect();
    propagate(view, config, &schedule, init, dirty)
}

/// Grows `base` by `new_edge` and re-converges starting from `base_messages`.
///
/// `base_messages` must be converged on `base`. The two new directed messages
/// start uniform; the result has the same fixed point as BP from scratch on
/// the grown view.
pub fn adaptive_bp<'a, T: Scalar>(
    base: &MrfView<'a, T>,
    base_messages: &MessageSet<T>,
    new_edge: (NodeId, NodeId),
    config: &BpConfig,
) -> Result<(MrfView<'a, T>, BpResult<T>)> {
    let (v, u) = new_edge;
    let mrf = base.mrf();
    let edge = mrf
        .find_edge(v, u)
        .ok_or_else(|| Error::Contract(format!("({v},{u}) is not an edge of the graph")))?;
    if base.contains_edge(edge) {
        return Err(Error::Contract(format!("edge ({v},{u}) already in the view")));
    }
    if !base.edge_ids().is_empty() && !base.touches(v) {
        return Err(Error::Contract(format!("node {v} is not part of the base view")));
    }
    let grown = base.with_edge(edge);
    let result = run_bp_incremental(&grown, config, base_messages, &[])?;
    Ok((grown, result))
}

fn seed<T: Scalar>(
    view: &MrfView<'_, T>,
    schedule: &Schedule,
    warm: Option<&MessageSet<T>>,
) -> Result<(Vec<T>, Vec<bool>)> {
    let c = view.mrf().class_count();
    let uniform = T::one() / T::of(c as f64);
    let mut values = vec![uniform; schedule.dirs.len() * c];
    let mut missing = vec![true; schedule.dirs.len()];
    let Some(warm) = warm else {
        return Ok((values, missing));
    };
    let mut used = 0;
    for (d, dir) in schedule.dirs.iter().enumerate() {
        if let Some(m) = warm.get(dir.from, dir.to) {
            if m.len() != c {
                return Err(Error::Contract(format!(
                    "warm-start message {}→{} has {} classes, expected {c}",
                    dir.from,
                    dir.to,
                    m.len()
                )));
            }
            values[d * c..(d + 1) * c].copy_from_slice(m.probs());
            missing[d] = false;
            used += 1;
        }
    }
    if used != warm.len() {
        return Err(Error::Contract(
            "warm-start messages include edges outside the graph".into(),
        ));
    }
    Ok((values, missing))
}

fn propagate<T: Scalar>(
    view: &MrfView<'_, T>,
    config: &BpConfig,
    schedule: &Schedule,
    mut current: Vec<T>,
    mut dirty: Vec<bool>,
) -> Result<BpResult<T>> {
    let mrf = view.mrf();
    let c = mrf.class_count();
    let tol = T::of(config.tolerance);
    let damping = T::of(config.damping);
    let mut next = current.clone();
    let mut changed = vec![false; schedule.dirs.len()];
    let mut scratch = vec![T::zero(); c];
    let mut raw = vec![T::zero(); c];

    let mut iterations = 0;
    let mut updates = 0u64;
    let mut final_change = T::zero();
    let mut converged = schedule.dirs.is_empty();
    let exact = schedule.acyclic && config.damping == 0.0;

    while !converged && iterations < config.max_iterations {
        if !dirty.iter().any(|&d| d) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut max_change = T::zero();
        for d in 0..schedule.dirs.len() {
            changed[d] = false;
            if !dirty[d] {
                continue;
            }
            updates += 1;
            let dir = schedule.dirs[d];
            compute_message(
                mrf,
                dir,
                &schedule.inputs[d],
                &current,
                &mut scratch,
                &mut raw,
            )?;
            let old = &current[d * c..(d + 1) * c];
            if damping > T::zero() {
                let keep = T::one() - damping;
                let mut total = T::zero();
                for (r, &o) in raw.iter_mut().zip(old) {
                    *r = keep * *r + damping * o;
                    total = total + *r;
                }
                raw.iter_mut().for_each(|r| *r = *r / total);
            }
            let mut delta = T::zero();
            let mut differs = false;
            for (&r, &o) in raw.iter().zip(old) {
                delta = delta.max((r - o).abs());
                differs |= r != o;
            }
            next[d * c..(d + 1) * c].copy_from_slice(&raw);
            changed[d] = differs;
            max_change = max_change.max(delta);
        }
        current.copy_from_slice(&next);
        dirty.iter_mut().for_each(|d| *d = false);
        for (d, _) in changed.iter().enumerate().filter(|(_, &ch)| ch) {
            for &dep in &schedule.dependents[d] {
                dirty[dep] = true;
            }
        }
        final_change = max_change;
        if !exact && max_change <= tol {
            converged = true;
        }
    }

    let mut messages = MessageSet::new();
    for (d, dir) in schedule.dirs.iter().enumerate() {
        messages.insert(
            dir.from,
            dir.to,
            Distribution::from_normalized(current[d * c..(d + 1) * c].to_vec()),
        );
    }
    Ok(BpResult {
        messages,
        converged,
        iterations_used: iterations,
        message_updates: updates,
        final_change: final_change.as_f64(),
    })
}

/// `m_{j→i}(x_i) ∝ Σ_{x_j} ψ(x_i, x_j) φ(x_j) ∏_{k ∈ N(j)\i} m_{k→j}(x_j)`,
/// floored and normalized, written into `out`.
fn compute_message<T: Scalar>(
    mrf: &Mrf<T>,
    dir: Directed,
    inputs: &[usize],
    current: &[T],
    h: &mut [T],
    out: &mut [T],
) -> Result<()> {
    let c = h.len();
    h.copy_from_slice(mrf.prior(dir.from).probs());
    let rescale_below = T::of(1e-100);
    for &k in inputs {
        let m = &current[k * c..(k + 1) * c];
        let mut peak = T::zero();
        for (x, &mk) in h.iter_mut().zip(m) {
            *x = *x * mk;
            peak = peak.max(*x);
        }
        if peak > T::zero() && peak < rescale_below {
            h.iter_mut().for_each(|x| *x = *x / peak);
        }
    }
    let mut total = T::zero();
    for (xi, o) in out.iter_mut().enumerate() {
        let mut s = T::zero();
        for (xj, &hj) in h.iter().enumerate() {
            s = s + mrf.compatibility(dir.edge, dir.to, xi, xj) * hj;
        }
        *o = s;
        total = total + s;
    }
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::Numerical(format!(
            "message {}→{} annihilated (all entries zero)",
            dir.from, dir.to
        )));
    }
    let mut total = T::zero();
    for o in out.iter_mut() {
        *o = (*o).max(T::MESSAGE_FLOOR);
        total = total + *o;
    }
    out.iter_mut().for_each(|o| *o = *o / total);
    Ok(())
}

/// `b(x_i) ∝ φ(x_i) ∏_j m_{j→i}(x_i)` over every message in `messages` that
/// enters `node`.
pub fn compute_belief<T: Scalar>(
    mrf: &Mrf<T>,
    messages: &MessageSet<T>,
    node: NodeId,
) -> Result<Distribution<T>> {
    mrf.check_node(node)?;
    let mut b = mrf.prior(node).probs().to_vec();
    for (_, m) in messages.incoming(node) {
        let mut peak = T::zero();
        for (x, &mk) in b.iter_mut().zip(m.probs()) {
            *x = *x * mk;
            peak = peak.max(*x);
        }
        if peak > T::zero() && peak < T::of(1e-100) {
            b.iter_mut().for_each(|x| *x = *x / peak);
        }
    }
    Distribution::from_weights(b)
        .map_err(|_| Error::Numerical(format!("belief of node {node} underflowed to zero")))
}

/// Beliefs of every node, computed from one message set.
pub fn all_beliefs<T: Scalar>(mrf: &Mrf<T>, messages: &MessageSet<T>) -> Result<Vec<Distribution<T>>> {
    mrf.nodes().map(|n| compute_belief(mrf, messages, n)).collect()
}
