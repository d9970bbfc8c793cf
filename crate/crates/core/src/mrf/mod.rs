//! Discrete pairwise Markov random fields.
//!
//! An [`Mrf`] is an undirected graph whose nodes carry a prior over `c`
//! classes and whose edges carry a `c × c` compatibility matrix. The model is
//! immutable once built; perturbed copies (masked priors, uniform priors) are
//! produced with [`Mrf::with_priors`].

mod graph;
pub mod io;
mod oracle;

use std::collections::HashMap;
use std::sync::Arc;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use oracle::{brute_force_marginal, brute_force_marginals, BRUTE_FORCE_MAX_STATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A probability vector over the class simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution<T>(Vec<T>);

impl<T: Scalar> Distribution<T> {
    /// Validates that `probs` is non-negative and sums to one.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::validation("distribution", "no entries"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= T::zero()) || !p.is_finite()) {
            return Err(Error::validation(
                "distribution",
                format!("entry {p} is negative or not finite"),
            ));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::SIMPLEX_TOL {
            return Err(Error::validation(
                "distribution",
                format!("entries sum to {total}, expected 1"),
            ));
        }
        Ok(Distribution(probs))
    }

    /// Normalizes non-negative weights. Fails when the weights carry no mass.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::validation(
                "distribution",
                "weights must be finite and non-negative",
            ));
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::Numerical(format!("weights sum to {total}")));
        }
        Ok(Distribution(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(classes: usize) -> Self {
        let p = T::one() / T::of(classes as f64);
        Distribution(vec![p; classes])
    }

    pub fn one_hot(classes: usize, class: usize) -> Self {
        let mut probs = vec![T::zero(); classes];
        probs[class] = T::one();
        Distribution(probs)
    }

    /// Wraps an already-normalized vector without checking it.
    pub(crate) fn from_normalized(probs: Vec<T>) -> Self {
        Distribution(probs)
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every entry equals `1/c` exactly.
    pub fn is_uniform(&self) -> bool {
        *self == Self::uniform(self.len())
    }

    pub fn cast<U: Scalar>(&self) -> Distribution<U> {
        Distribution(self.0.iter().map(|p| U::of(p.as_f64())).collect())
    }
}

impl<T> std::ops::Index<usize> for Distribution<T> {
    type Output = T;

    fn index(&self, class: usize) -> &T {
        &self.0[class]
    }
}

/// Edge compatibility table `ψ(x_a, x_b)`, row-major, rows indexed by the
/// class of the edge's first declared endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityMatrix<T> {
    classes: usize,
    entries: Vec<T>,
}

impl<T: Scalar> CompatibilityMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let classes = rows.len();
        if classes < 2 {
            return Err(Error::validation(
                "potential",
                "compatibility matrix needs at least 2 classes",
            ));
        }
        let mut entries = Vec::with_capacity(classes * classes);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != classes {
                return Err(Error::validation(
                    "potential",
                    format!("row {r} has {} entries, expected {classes}", row.len()),
                ));
            }
            entries.extend(row);
        }
        Self::from_row_major(classes, entries)
    }

    pub fn from_row_major(classes: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != classes * classes {
            return Err(Error::validation("potential", "entry count is not c*c"));
        }
        if entries.iter().any(|e| !(*e >= T::zero()) || !e.is_finite()) {
            return Err(Error::validation(
                "potential",
                "entries must be finite and non-negative",
            ));
        }
        let m = CompatibilityMatrix { classes, entries };
        for k in 0..classes {
            if (0..classes).all(|j| m.get(k, j) == T::zero()) {
                return Err(Error::validation("potential", format!("row {k} is all zero")));
            }
            if (0..classes).all(|i| m.get(i, k) == T::zero()) {
                return Err(Error::validation(
                    "potential",
                    format!("column {k} is all zero"),
                ));
            }
        }
        Ok(m)
    }

    /// Diagonal `strength`, off-diagonal `(1 - strength) / (c - 1)`.
    pub fn homophily(classes: usize, strength: T) -> Result<Self> {
        if classes < 2 {
            return Err(Error::validation("potential", "need at least 2 classes"));
        }
        let off = (T::one() - strength) / T::of((classes - 1) as f64);
        let entries = (0..classes * classes)
            .map(|k| if k / classes == k % classes { strength } else { off })
            .collect();
        Self::from_row_major(classes, entries)
    }

    pub fn ones(classes: usize) -> Self {
        CompatibilityMatrix {
            classes,
            entries: vec![T::one(); classes * classes],
        }
    }

    pub fn identity(classes: usize) -> Self {
        let entries = (0..classes * classes)
            .map(|k| if k / classes == k % classes { T::one() } else { T::zero() })
            .collect();
        CompatibilityMatrix { classes, entries }
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.classes + col]
    }

    pub fn transpose(&self) -> Self {
        let c = self.classes;
        let entries = (0..c * c).map(|k| self.get(k % c, k / c)).collect();
        CompatibilityMatrix { classes: c, entries }
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.classes).map(<[T]>::to_vec).collect()
    }
}

/// Immutable pairwise MRF. The topology and potentials are shared between
/// copies that differ only in their priors.
#[derive(Debug, Clone)]
pub struct Mrf<T> {
    classes: usize,
    priors: Vec<Distribution<T>>,
    topo: Arc<Topology<T>>,
}

#[derive(Debug)]
struct Topology<T> {
    edges: Vec<(NodeId, NodeId)>,
    potential_table: Vec<CompatibilityMatrix<T>>,
    edge_potential: Vec<usize>,
    shared_potential: Option<usize>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
}

/// Incremental constructor for [`Mrf`]; `build` validates everything.
#[derive(Debug, Clone)]
pub struct MrfBuilder<T> {
    classes: usize,
    priors: Vec<Option<Distribution<T>>>,
    edges: Vec<(NodeId, NodeId, Option<CompatibilityMatrix<T>>)>,
    shared: Option<CompatibilityMatrix<T>>,
}

impl<T: Scalar> MrfBuilder<T> {
    pub fn new(node_count: usize, classes: usize) -> Self {
        MrfBuilder {
            classes,
            priors: vec![None; node_count],
            edges: Vec::new(),
            shared: None,
        }
    }

    pub fn prior(mut self, node: usize, prior: Distribution<T>) -> Self {
        self.set_prior(node, prior);
        self
    }

    pub fn set_prior(&mut self, node: usize, prior: Distribution<T>) {
        if node >= self.priors.len() {
            self.priors.resize(node + 1, None);
        }
        self.priors[node] = Some(prior);
    }

    pub fn edge(mut self, u: usize, v: usize) -> Self {
        self.add_edge(u, v, None);
        self
    }

    pub fn edge_with(mut self, u: usize, v: usize, potential: CompatibilityMatrix<T>) -> Self {
        self.add_edge(u, v, Some(potential));
        self
    }

    pub fn add_edge(&mut self, u: usize, v: usize, potential: Option<CompatibilityMatrix<T>>) {
        let needed = u.max(v) + 1;
        if needed > self.priors.len() {
            self.priors.resize(needed, None);
        }
        self.edges.push((NodeId(u), NodeId(v), potential));
    }

    pub fn shared_potential(mut self, potential: CompatibilityMatrix<T>) -> Self {
        self.shared = Some(potential);
        self
    }

    pub fn set_shared_potential(&mut self, potential: CompatibilityMatrix<T>) {
        self.shared = Some(potential);
    }

    pub fn node_count(&self) -> usize {
        self.priors.len()
    }

    pub fn build(self) -> Result<Mrf<T>> {
        let c = self.classes;
        if c < 2 {
            return Err(Error::validation("class count", format!("{c} < 2")));
        }
        let n = self.priors.len();
        let mut priors = Vec::with_capacity(n);
        for (i, p) in self.priors.into_iter().enumerate() {
            let p = p.unwrap_or_else(|| Distribution::uniform(c));
            if p.len() != c {
                return Err(Error::validation(
                    format!("prior of node {i}"),
                    format!("{} classes, expected {c}", p.len()),
                ));
            }
            priors.push(p);
        }

        let mut potential_table = Vec::new();
        let shared_potential = match self.shared {
            Some(m) => {
                if m.classes() != c {
                    return Err(Error::validation(
                        "shared potential",
                        format!("{} classes, expected {c}", m.classes()),
                    ));
                }
                potential_table.push(m);
                Some(0)
            }
            None => None,
        };

        let mut edges = Vec::with_capacity(self.edges.len());
        let mut edge_potential = Vec::with_capacity(self.edges.len());
        let mut edge_index = HashMap::with_capacity(self.edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (u, v, pot) in self.edges {
            if u == v {
                return Err(Error::validation(format!("edge ({u},{v})"), "self-loop"));
            }
            let key = (u.min(v), u.max(v));
            let id = EdgeId(edges.len());
            if edge_index.insert(key, id).is_some() {
                return Err(Error::validation(format!("edge ({u},{v})"), "duplicate edge"));
            }
            let slot = match pot {
                Some(m) => {
                    if m.classes() != c {
                        return Err(Error::validation(
                            format!("potential of edge ({u},{v})"),
                            format!("{} classes, expected {c}", m.classes()),
                        ));
                    }
                    potential_table.push(m);
                    potential_table.len() - 1
                }
                None => shared_potential.ok_or_else(|| {
                    Error::validation(
                        format!("edge ({u},{v})"),
                        "no potential given and no shared potential declared",
                    )
                })?,
            };
            edges.push((u, v));
            edge_potential.push(slot);
            adjacency[u.0].push((v, id));
            adjacency[v.0].push((u, id));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Mrf {
            classes: c,
            priors,
            topo: Arc::new(Topology {
                edges,
                potential_table,
                edge_potential,
                shared_potential,
                adjacency,
                edge_index,
            }),
        })
    }
}

impl<T: Scalar> Mrf<T> {
    pub fn builder(node_count: usize, classes: usize) -> MrfBuilder<T> {
        MrfBuilder::new(node_count, classes)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.priors.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.topo.edges.len()
    }

    #[inline]
    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId)
    }

    #[inline]
    pub fn prior(&self, node: NodeId) -> &Distribution<T> {
        &self.priors[node.0]
    }

    pub fn priors(&self) -> &[Distribution<T>] {
        &self.priors
    }

    /// Endpoints in declared order.
    #[inline]
    pub fn edge(&self, edge: EdgeId) -> (NodeId, NodeId) {
        self.topo.edges[edge.0]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.topo.edges
    }

    /// Potential in declared endpoint order.
    #[inline]
    pub fn potential(&self, edge: EdgeId) -> &CompatibilityMatrix<T> {
        &self.topo.potential_table[self.topo.edge_potential[edge.0]]
    }

    /// The potential shared by every edge without an explicit one, if any.
    pub fn shared_potential(&self) -> Option<&CompatibilityMatrix<T>> {
        self.topo.shared_potential.map(|i| &self.topo.potential_table[i])
    }

    /// True when the edge uses the shared potential.
    pub fn uses_shared_potential(&self, edge: EdgeId) -> bool {
        self.topo.shared_potential == Some(self.topo.edge_potential[edge.0])
    }

    /// `ψ(x_to, x_from)` for a message travelling `from → to` along `edge`.
    #[inline]
    pub fn compatibility(&self, edge: EdgeId, to: NodeId, to_class: usize, from_class: usize) -> T {
        let (a, _) = self.topo.edges[edge.0];
        let m = self.potential(edge);
        if to == a {
            m.get(to_class, from_class)
        } else {
            m.get(from_class, to_class)
        }
    }

    /// Neighbors with connecting edges, sorted by neighbor id.
    #[inline]
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.topo.adjacency[node.0]
    }

    #[inline]
    pub fn degree(&self, node: NodeId) -> usize {
        self.topo.adjacency[node.0].len()
    }

    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.topo.edge_index.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        node.0 < self.node_count()
    }

    /// A copy sharing topology and potentials but with replaced priors.
    pub fn with_priors(&self, priors: Vec<Distribution<T>>) -> Result<Self> {
        if priors.len() != self.node_count() {
            return Err(Error::validation(
                "priors",
                format!("{} priors for {} nodes", priors.len(), self.node_count()),
            ));
        }
        if let Some((i, _)) = priors.iter().enumerate().find(|(_, p)| p.len() != self.classes) {
            return Err(Error::validation(
                format!("prior of node {i}"),
                "wrong class count",
            ));
        }
        Ok(Mrf {
            priors,
            ..self.clone()
        })
    }

    /// A copy with a single prior replaced.
    pub fn with_prior(&self, node: NodeId, prior: Distribution<T>) -> Result<Self> {
        let mut priors = self.priors.clone();
        priors[node.0] = prior;
        self.with_priors(priors)
    }

    pub(crate) fn check_node(&self, node: NodeId) -> Result<()> {
        if self.contains_node(node) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "node {node} out of range (graph has {} nodes)",
                self.node_count()
            )))
        }
    }
}
