#![allow(dead_code)]

use mrf_explain::mrf::{CompatibilityMatrix, Distribution, Mrf};
use mrf_explain::{generate_synthetic, GraphKind, SyntheticConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_distribution(rng: &mut ChaCha8Rng, c: usize) -> Distribution<f64> {
    let w = (0..c).map(|_| rng.gen_range(0.05..1.0)).collect();
    Distribution::from_weights(w).unwrap()
}

pub fn random_potential(rng: &mut ChaCha8Rng, c: usize) -> CompatibilityMatrix<f64> {
    let rows = (0..c)
        .map(|_| (0..c).map(|_| rng.gen_range(0.1..2.0)).collect())
        .collect();
    CompatibilityMatrix::new(rows).unwrap()
}

/// MRF on the given edges with random priors and a random potential per edge.
pub fn random_mrf(rng: &mut ChaCha8Rng, n: usize, c: usize, edges: &[(usize, usize)]) -> Mrf<f64> {
    let mut b = Mrf::builder(n, c);
    for i in 0..n {
        b.set_prior(i, random_distribution(rng, c));
    }
    for &(u, v) in edges {
        let p = random_potential(rng, c);
        b.add_edge(u, v, Some(p));
    }
    b.build().unwrap()
}

pub fn random_tree_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (rng.gen_range(0..i), i)).collect()
}

/// Connected graph: a random tree plus up to `extra` random chords.
pub fn random_connected_edges(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(usize, usize)> {
    let mut edges = random_tree_edges(rng, n);
    for _ in 0..extra * 4 {
        if edges.len() >= n - 1 + extra {
            break;
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && !edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
            edges.push((u, v));
        }
    }
    edges
}

pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Mrf<f64> {
    let edges = random_tree_edges(rng, n);
    random_mrf(rng, n, c, &edges)
}

pub fn path(n: usize, c: usize, h: f64) -> Mrf<f64> {
    let mut b = Mrf::builder(n, c).shared_potential(CompatibilityMatrix::homophily(c, h).unwrap());
    for i in 0..n {
        let mut w = vec![1.0; c];
        w[i % c] = 3.0;
        b.set_prior(i, Distribution::from_weights(w).unwrap());
    }
    for i in 1..n {
        b.add_edge(i - 1, i, None);
    }
    b.build().unwrap()
}

pub fn triangle() -> Mrf<f64> {
    Mrf::builder(3, 2)
        .shared_potential(CompatibilityMatrix::homophily(2, 0.8).unwrap())
        .prior(1, Distribution::new(vec![0.9, 0.1]).unwrap())
        .prior(2, Distribution::new(vec![0.3, 0.7]).unwrap())
        .edge(0, 1)
        .edge(0, 2)
        .edge(1, 2)
        .build()
        .unwrap()
}

pub fn synthetic_suite(instance: u64) -> Mrf<f64> {
    generate_synthetic(&SyntheticConfig {
        graph: GraphKind::ErdosRenyi { mean_degree: 3.0 },
        nodes: 50,
        classes: 3,
        homophily: 0.9,
        biased_prior_fraction: 0.8,
        bias_strength: 0.9,
        seed: instance,
    })
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
