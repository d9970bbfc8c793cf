//! Depth-first enumeration of the connected acyclic subgraphs (coalitions)
//! that contain a target node.
//!
//! Every coalition is reached by adding one frontier edge to the coalition
//! on the stack below it, so a caller can carry converged BP state down the
//! recursion. Each frame tries its frontier edges in order: first those
//! leaving the node it was entered through, then those leaving the other
//! coalition nodes in insertion order. After an edge's subtree is exhausted
//! the edge is forbidden for the rest of the frame; the child frames see the
//! forbidden set as it was when they were entered. This include/exclude
//! split visits every coalition exactly once.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bp::MrfView;
use crate::error::{Error, Result};
use crate::mrf::{EdgeId, Mrf, NodeId};
use crate::scalar::Scalar;

/// Bounds on the enumeration. `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumConfig {
    /// A node `u` may join only if its graph distance to the target is `< D`.
    pub max_distance: Option<usize>,
    /// Maximum number of edges in a coalition.
    pub max_complexity: Option<usize>,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig {
            max_distance: Some(3),
            max_complexity: Some(8),
        }
    }
}

impl EnumConfig {
    pub fn unbounded() -> Self {
        EnumConfig {
            max_distance: None,
            max_complexity: None,
        }
    }

    pub fn new(max_distance: Option<usize>, max_complexity: Option<usize>) -> Self {
        EnumConfig {
            max_distance,
            max_complexity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_distance == Some(0) {
            return Err(Error::validation("max distance", "must be at least 1"));
        }
        if self.max_complexity == Some(0) {
            return Err(Error::validation("max complexity", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn admits_distance(&self, d: usize) -> bool {
        self.max_distance.is_none_or(|max| d < max)
    }

    pub(crate) fn admits_growth(&self, current_edges: usize) -> bool {
        self.max_complexity.is_none_or(|max| current_edges < max)
    }
}

/// Sorted edge list as bytes; equal keys iff equal edge sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut pairs: Vec<(u64, u64)> = pairs
            .into_iter()
            .map(|(a, b)| (a.0.min(b.0) as u64, a.0.max(b.0) as u64))
            .collect();
        pairs.sort_unstable();
        let mut bytes = Vec::with_capacity(pairs.len() * 16);
        for (a, b) in pairs {
            bytes.extend_from_slice(&a.to_be_bytes());
            bytes.extend_from_slice(&b.to_be_bytes());
        }
        CanonicalKey(bytes)
    }

    pub fn from_edges<T: Scalar>(mrf: &Mrf<T>, edges: &[EdgeId]) -> Self {
        Self::from_pairs(edges.iter().map(|&e| mrf.edge(e)))
    }

    /// Key of the edgeless coalition holding only the target.
    pub fn target_only() -> Self {
        CanonicalKey(Vec::new())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn edge_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.chunks_exact(16).map(|ch| {
            let a = u64::from_be_bytes(ch[..8].try_into().expect("8 bytes"));
            let b = u64::from_be_bytes(ch[8..].try_into().expect("8 bytes"));
            (NodeId(a as usize), NodeId(b as usize))
        })
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("{}");
        }
        for (i, (a, b)) in self.edge_pairs().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}-{b}")?;
        }
        Ok(())
    }
}

/// A connected acyclic edge set containing the target.
///
/// `edges[i]` joins `links[i].0` (already present) to `nodes[i + 1]`
/// (= `links[i].1`); `nodes[0]` is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Coalition {
    pub target: NodeId,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub links: Vec<(NodeId, NodeId)>,
    pub parent_key: Option<CanonicalKey>,
    pub added_edge: Option<(NodeId, NodeId)>,
    key: CanonicalKey,
}

impl Coalition {
    pub fn target_only(target: NodeId) -> Self {
        Coalition {
            target,
            nodes: vec![target],
            edges: Vec::new(),
            links: Vec::new(),
            parent_key: None,
            added_edge: None,
            key: CanonicalKey::target_only(),
        }
    }

    /// Builds a coalition from edges given in growth order; each link's first
    /// node must already be present and its second node must be new.
    pub fn from_links<T: Scalar>(
        mrf: &Mrf<T>,
        target: NodeId,
        links: &[(NodeId, NodeId)],
    ) -> Result<Self> {
        let mut c = Coalition::target_only(target);
        for &(v, u) in links {
            let e = mrf
                .find_edge(v, u)
                .ok_or_else(|| Error::Contract(format!("({v},{u}) is not an edge")))?;
            if !c.contains_node(v) || c.contains_node(u) {
                return Err(Error::Contract(format!(
                    "link ({v},{u}) does not grow the coalition as a tree"
                )));
            }
            c.nodes.push(u);
            c.edges.push(e);
            c.links.push((v, u));
        }
        c.key = CanonicalKey::from_pairs(c.links.iter().copied());
        c.added_edge = c.links.last().copied();
        if c.edges.len() > 1 {
            c.parent_key = Some(CanonicalKey::from_pairs(
                c.links[..c.links.len() - 1].iter().copied(),
            ));
        }
        Ok(c)
    }

    pub fn key(&self) -> &CanonicalKey {
        &self.key
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_target_only(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    pub fn view<'a, T: Scalar>(&self, mrf: &'a Mrf<T>) -> MrfView<'a, T> {
        MrfView::restricted(mrf, self.edges.iter().copied())
    }

    /// The first `len` edges, in growth order, as a coalition.
    pub fn prefix(&self, len: usize) -> Coalition {
        let links = &self.links[..len];
        Coalition {
            target: self.target,
            nodes: self.nodes[..=len].to_vec(),
            edges: self.edges[..len].to_vec(),
            links: links.to_vec(),
            parent_key: (len > 1).then(|| CanonicalKey::from_pairs(links[..len - 1].iter().copied())),
            added_edge: links.last().copied(),
            key: CanonicalKey::from_pairs(links.iter().copied()),
        }
    }

    /// Deletes `node` with its incident edges and keeps only the component
    /// that still contains the target; fragments cut off from the target are
    /// dropped because they can no longer send messages to it.
    pub fn without(&self, node: NodeId) -> Result<Coalition> {
        if node == self.target {
            return Err(Error::Contract(
                "the target cannot be removed from its own coalition".into(),
            ));
        }
        if !self.contains_node(node) {
            return Err(Error::Contract(format!("node {node} is not in the coalition")));
        }
        let mut kept = Coalition::target_only(self.target);
        for (i, &(v, u)) in self.links.iter().enumerate() {
            if u != node && v != node && kept.contains_node(v) {
                kept.nodes.push(u);
                kept.edges.push(self.edges[i]);
                kept.links.push((v, u));
            }
        }
        kept.key = CanonicalKey::from_pairs(kept.links.iter().copied());
        kept.added_edge = kept.links.last().copied();
        Ok(kept)
    }
}

/// Result of removing an explaining variable from a coalition.
#[derive(Debug, Clone, PartialEq)]
pub enum Reduced {
    Coalition(Coalition),
    TargetOnly,
}

/// `S \ {X_i}` restricted to the target's component.
pub fn coalition_minus(coalition: &Coalition, node: NodeId) -> Result<Reduced> {
    let kept = coalition.without(node)?;
    Ok(if kept.is_target_only() {
        Reduced::TargetOnly
    } else {
        Reduced::Coalition(kept)
    })
}

/// Nodes admitted by the distance bound, with their distance to the target.
pub(crate) fn admissible_nodes<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    config: &EnumConfig,
) -> HashMap<NodeId, usize> {
    let mut dist = HashMap::from([(target, 0usize)]);
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v] + 1;
        if !config.admits_distance(d) {
            continue;
        }
        for &(u, _) in mrf.neighbors(v) {
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(u) {
                slot.insert(d);
                queue.push_back(u);
            }
        }
    }
    dist
}

struct Dfs<'m, T, F> {
    mrf: &'m Mrf<T>,
    config: EnumConfig,
    admissible: HashMap<NodeId, usize>,
    sorted: HashMap<NodeId, Vec<(NodeId, EdgeId)>>,
    current: Coalition,
    keys: Vec<CanonicalKey>,
    forbidden: HashSet<EdgeId>,
    visited: usize,
    visitor: F,
}

impl<T: Scalar, F: FnMut(&Coalition) -> Result<()>> Dfs<'_, T, F> {
    fn sorted_neighbors(&mut self, node: NodeId) -> &[(NodeId, EdgeId)] {
        let mrf = self.mrf;
        self.sorted.entry(node).or_insert_with(|| {
            mrf.degree_sorted_neighbors(node)
                .into_iter()
                .map(|u| (u, mrf.find_edge(node, u).expect("neighbor edge")))
                .collect()
        })
    }

    fn frontier(&mut self, entry: NodeId) -> Vec<(NodeId, NodeId, EdgeId)> {
        let mut out = Vec::new();
        let order: Vec<NodeId> = std::iter::once(entry)
            .chain(self.current.nodes.iter().copied().filter(|&m| m != entry))
            .collect();
        for v in order {
            let candidates = self.sorted_neighbors(v).to_vec();
            for (u, e) in candidates {
                if self.admissible.contains_key(&u) && !self.current.contains_node(u) {
                    out.push((v, u, e));
                }
            }
        }
        out
    }

    fn frame(&mut self, entry: NodeId) -> Result<()> {
        if !self.config.admits_growth(self.current.edges.len()) {
            return Ok(());
        }
        let frontier = self.frontier(entry);
        let mut forbidden_here = Vec::new();
        for (v, u, e) in frontier {
            if self.forbidden.contains(&e) {
                continue;
            }
            self.push(v, u, e);
            (self.visitor)(&self.current)?;
            self.visited += 1;
            self.frame(u)?;
            self.pop();
            self.forbidden.insert(e);
            forbidden_here.push(e);
        }
        for e in forbidden_here {
            self.forbidden.remove(&e);
        }
        Ok(())
    }

    fn push(&mut self, v: NodeId, u: NodeId, e: EdgeId) {
        let parent = self.keys.last().cloned();
        let c = &mut self.current;
        c.nodes.push(u);
        c.edges.push(e);
        c.links.push((v, u));
        c.parent_key = parent;
        c.added_edge = Some((v, u));
        c.key = CanonicalKey::from_pairs(c.links.iter().copied());
        self.keys.push(c.key.clone());
    }

    fn pop(&mut self) {
        let c = &mut self.current;
        c.nodes.pop();
        c.edges.pop();
        c.links.pop();
        self.keys.pop();
        c.key = self.keys.last().cloned().unwrap_or_default();
        c.added_edge = c.links.last().copied();
        c.parent_key = (self.keys.len() > 1).then(|| self.keys[self.keys.len() - 2].clone());
    }
}

/// Calls `visitor` once per coalition of `target` under `config`, in DFS
/// order, and returns the number of coalitions visited.
///
/// Every coalition with two or more edges extends, by its `added_edge`, the
/// coalition named by `parent_key`, which was visited earlier and is still on
/// the DFS path. An error returned by the visitor stops the enumeration.
pub fn enumerate_coalitions<T, F>(
    mrf: &Mrf<T>,
    target: NodeId,
    config: &EnumConfig,
    visitor: F,
) -> Result<usize>
where
    T: Scalar,
    F: FnMut(&Coalition) -> Result<()>,
{
    mrf.check_node(target)?;
    config.validate()?;
    let mut dfs = Dfs {
        mrf,
        config: *config,
        admissible: admissible_nodes(mrf, target, config),
        sorted: HashMap::new(),
        current: Coalition::target_only(target),
        keys: Vec::new(),
        forbidden: HashSet::new(),
        visited: 0,
        visitor,
    };
    dfs.frame(target)?;
    Ok(dfs.visited)
}

/// All coalitions in visit order.
pub fn collect_coalitions<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    config: &EnumConfig,
) -> Result<Vec<Coalition>> {
    let mut out = Vec::new();
    enumerate_coalitions(mrf, target, config, |c| {
        out.push(c.clone());
        Ok(())
    })?;
    Ok(out)
}

/// `𝒮(X_i; X, G)`: the coalitions whose node set contains `node`.
pub fn coalitions_containing(coalitions: &[Coalition], node: NodeId) -> Vec<&Coalition> {
    coalitions.iter().filter(|c| c.contains_node(node)).collect()
}

/// Largest edge count accepted by [`brute_force_coalitions`].
pub const BRUTE_FORCE_MAX_EDGES: usize = 20;

/// Reference enumeration: checks every edge subset of the graph against the
/// coalition definition.
pub fn brute_force_coalitions<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    config: &EnumConfig,
) -> Result<BTreeSet<CanonicalKey>> {
    mrf.check_node(target)?;
    let m = mrf.edge_count();
    if m > BRUTE_FORCE_MAX_EDGES {
        return Err(Error::Capacity(format!(
            "{m} edges exceed the brute-force limit of {BRUTE_FORCE_MAX_EDGES}"
        )));
    }
    // hop distances by repeated relaxation, independent of the BFS helpers
    let n = mrf.node_count();
    let mut dist = vec![usize::MAX; n];
    dist[target.0] = 0;
    loop {
        let mut changed = false;
        for &(a, b) in mrf.edges() {
            for (x, y) in [(a, b), (b, a)] {
                if dist[x.0] != usize::MAX && dist[x.0] + 1 < dist[y.0] {
                    dist[y.0] = dist[x.0] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut keys = BTreeSet::new();
    for mask in 1u32..(1u32 << m) {
        let chosen: Vec<(NodeId, NodeId)> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| mrf.edges()[i])
            .collect();
        if config.max_complexity.is_some_and(|c| chosen.len() > c) {
            continue;
        }
        let mut nodes: BTreeSet<NodeId> = BTreeSet::new();
        for &(a, b) in &chosen {
            nodes.insert(a);
            nodes.insert(b);
        }
        if !nodes.contains(&target) || nodes.len() != chosen.len() + 1 {
            continue;
        }
        if nodes
            .iter()
            .any(|v| dist[v.0] == usize::MAX || !config.admits_distance(dist[v.0]))
        {
            continue;
        }
        // connectivity by flooding from the target over chosen edges
        let mut reached = BTreeSet::from([target]);
        loop {
            let before = reached.len();
            for &(a, b) in &chosen {
                if reached.contains(&a) || reached.contains(&b) {
                    reached.insert(a);
                    reached.insert(b);
                }
            }
            if reached.len() == before {
                break;
            }
        }
        if reached.len() == nodes.len() {
            keys.insert(CanonicalKey::from_pairs(chosen));
        }
    }
    Ok(keys)
}
