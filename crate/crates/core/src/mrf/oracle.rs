//! Exact marginals by summing the factorized joint over every assignment.
//! Only usable on tiny models; serves as ground truth for the BP tests.

use super::{Distribution, EdgeId, Mrf, NodeId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest joint table (`c^n`) the oracle will enumerate.
pub const BRUTE_FORCE_MAX_STATES: u64 = 10_000_000;

/// Exact marginal of `node` under `P(x) ∝ ∏ φ_i(x_i) ∏ ψ_ij(x_i, x_j)`.
pub fn brute_force_marginal<T: Scalar>(mrf: &Mrf<T>, node: NodeId) -> Result<Distribution<T>> {
    mrf.check_node(node)?;
    let mut all = brute_force_marginals(mrf)?;
    Ok(all.swap_remove(node.0))
}

/// Exact marginals of every node from a single pass over the joint.
pub fn brute_force_marginals<T: Scalar>(mrf: &Mrf<T>) -> Result<Vec<Distribution<T>>> {
    let n = mrf.node_count();
    let c = mrf.class_count();
    let states = (c as u64)
        .checked_pow(n as u32)
        .filter(|s| *s <= BRUTE_FORCE_MAX_STATES)
        .ok_or_else(|| Error::Capacity(format!("{c}^{n} joint states exceed the oracle limit")))?;

    let mut assignment = vec![0usize; n];
    let mut marginals = vec![vec![T::zero(); c]; n];
    for _ in 0..states {
        let mut weight = T::one();
        for (i, &x) in assignment.iter().enumerate() {
            weight = weight * mrf.prior(NodeId(i))[x];
        }
        for (e, &(a, b)) in mrf.edges().iter().enumerate() {
            weight = weight * mrf.potential(EdgeId(e)).get(assignment[a.0], assignment[b.0]);
        }
        for (m, &x) in marginals.iter_mut().zip(&assignment) {
            m[x] = m[x] + weight;
        }

        // odometer increment
        for slot in assignment.iter_mut() {
            *slot += 1;
            if *slot < c {
                break;
            }
            *slot = 0;
        }
    }
    marginals
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            Distribution::from_weights(m).map_err(|_| Error::Numerical(format!("joint has zero mass at node {i}")))
        })
        .collect()
}
