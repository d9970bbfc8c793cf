use std::collections::VecDeque;

use super::{Mrf, NodeId};
use crate::scalar::Scalar;

impl<T: Scalar> Mrf<T> {
    /// Hop distance from `source` to every node; `None` when unreachable.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[source.0] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.0].unwrap_or(0) + 1;
            for &(u, _) in self.neighbors(v) {
                if dist[u.0].is_none() {
                    dist[u.0] = Some(d);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// BFS hop count, `None` if `b` is unreachable from `a`.
    pub fn shortest_path_distance(&self, a: NodeId, b: NodeId) -> Option<usize> {
        if a == b {
            return Some(0);
        }
        self.bfs_distances(a)[b.0]
    }

    /// Neighbors ordered by ascending degree, ties by ascending id.
    pub fn degree_sorted_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.neighbors(node).iter().map(|&(u, _)| u).collect();
        out.sort_by_key(|&u| (self.degree(u), u));
        out
    }
}
