mod common;

use std::collections::BTreeMap;

use common::*;
use mrf_explain::{
    brute_force_coalitions, brute_force_marginal, characteristic, explain, BpConfig, CanonicalKey,
    CompatibilityMatrix, Distribution, EnumConfig, EvalMode, ExplainOptions, Explainer, Mrf, NodeId,
};
use proptest::prelude::*;

/// ν of an edge set computed from the exact marginal of a model that keeps
/// only those edges.
fn exact_value(mrf: &Mrf, target: NodeId, reference: &Distribution, pairs: &[(NodeId, NodeId)]) -> f64 {
    let mut b = Mrf::builder(mrf.node_count(), mrf.class_count());
    for n in mrf.nodes() {
        b.set_prior(n.0, mrf.prior(n).clone());
    }
    for &(u, v) in pairs {
        let e = mrf.find_edge(u, v).unwrap();
        let mut rows = mrf.potential(e).rows();
        if mrf.edge(e) != (u, v) {
            rows = CompatibilityMatrix::new(rows).unwrap().transpose().rows();
        }
        b.add_edge(u.0, v.0, Some(CompatibilityMatrix::new(rows).unwrap()));
    }
    let sub = b.build().unwrap();
    characteristic(reference, &brute_force_marginal(&sub, target).unwrap()).unwrap()
}

/// Edges of the target's component after deleting `node`.
fn remove(pairs: &[(NodeId, NodeId)], node: NodeId, target: NodeId) -> Vec<(NodeId, NodeId)> {
    let kept: Vec<_> = pairs.iter().copied().filter(|&(u, v)| u != node && v != node).collect();
    let mut reach = vec![target];
    loop {
        let before = reach.len();
        for &(u, v) in &kept {
            if reach.contains(&u) && !reach.contains(&v) {
                reach.push(v);
            } else if reach.contains(&v) && !reach.contains(&u) {
                reach.push(u);
            }
        }
        if reach.len() == before {
            break;
        }
    }
    kept.into_iter().filter(|(u, _)| reach.contains(u)).collect()
}

/// Shapley values straight from the definition over brute-force coalitions.
fn oracle_values(mrf: &Mrf, target: NodeId, cfg: &EnumConfig) -> BTreeMap<NodeId, (f64, usize)> {
    let explainer = Explainer::new(mrf, *cfg, BpConfig::default()).unwrap();
    let reference = explainer.reference_belief(target).unwrap();
    let mut totals: BTreeMap<NodeId, (f64, usize)> = BTreeMap::new();
    for key in brute_force_coalitions(mrf, target, cfg).unwrap() {
        let pairs: Vec<_> = key.edge_pairs().collect();
        let with = exact_value(mrf, target, &reference, &pairs);
        let mut nodes: Vec<NodeId> = pairs.iter().flat_map(|&(u, v)| [u, v]).filter(|&n| n != target).collect();
        nodes.sort();
        nodes.dedup();
        for n in nodes {
            let without = exact_value(mrf, target, &reference, &remove(&pairs, n, target));
            let slot = totals.entry(n).or_default();
            slot.0 += with - without;
            slot.1 += 1;
        }
    }
    totals.into_iter().map(|(n, (s, k))| (n, (s / k as f64, k))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_the_definition(seed in any::<u64>(), n in 2usize..7, extra in 0usize..4, d in 2usize..5) {
        let mut r = rng(seed);
        let edges = random_connected_edges(&mut r, n, extra);
        let mrf = random_mrf(&mut r, n, 2, &edges);
        let target = NodeId(0);
        let cfg = EnumConfig::new(Some(d), Some(5));
        let got = explain(&mrf, target, &cfg, &BpConfig::default()).unwrap();
        let want = oracle_values(&mrf, target, &cfg);
        for rec in &got.records {
            let (sv, count) = want.get(&rec.node).copied().unwrap_or((0.0, 0));
            prop_assert_eq!(rec.coalition_count, count);
            prop_assert!((rec.shapley_value - sv).abs() < 1e-9, "node {}: {} vs {}", rec.node, rec.shapley_value, sv);
        }
    }

    #[test]
    fn adaptive_and_scratch_agree(seed in any::<u64>(), n in 3usize..9, extra in 0usize..4) {
        let mut r = rng(seed);
        let edges = random_connected_edges(&mut r, n, extra);
        let mrf = random_mrf(&mut r, n, 3, &edges);
        let explainer = Explainer::new(&mrf, EnumConfig::default(), BpConfig::default()).unwrap();
        let opts = |mode| ExplainOptions { mode, keep_values: true };
        let a = explainer.explain_with(NodeId(0), opts(EvalMode::Adaptive)).unwrap();
        let s = explainer.explain_with(NodeId(0), opts(EvalMode::Scratch)).unwrap();
        prop_assert_eq!(&a.values, &s.values);
        prop_assert_eq!(a.ranking, s.ranking);
        prop_assert!(a.diagnostics.message_updates <= s.diagnostics.message_updates);
    }

    #[test]
    fn values_are_nonpositive(seed in any::<u64>(), n in 2usize..8, extra in 0usize..3) {
        let mut r = rng(seed);
        let edges = random_connected_edges(&mut r, n, extra);
        let mrf = random_mrf(&mut r, n, 2, &edges);
        let explainer = Explainer::new(&mrf, EnumConfig::default(), BpConfig::default()).unwrap();
        let res = explainer
            .explain_with(NodeId(0), ExplainOptions { keep_values: true, ..Default::default() })
            .unwrap();
        prop_assert!(res.values.unwrap().values().all(|&v| (-1e300..=0.0).contains(&v)));
    }
}

#[test]
fn triangle_matches_hand_enumeration() {
    let mrf = triangle();
    let cfg = EnumConfig::default();
    let res = explain(&mrf, NodeId(0), &cfg, &BpConfig::default()).unwrap();
    let want = oracle_values(&mrf, NodeId(0), &cfg);
    assert_eq!(res.records.len(), 2);
    for rec in &res.records {
        let (sv, count) = want[&rec.node];
        assert_eq!(rec.coalition_count, count);
        assert_eq!(count, 4);
        assert!((rec.shapley_value - sv).abs() < 1e-9);
    }
    assert_eq!(res.diagnostics.coalitions, 5);
}

#[test]
fn saturation_once_the_ball_covers_the_graph() {
    let mut r = rng(44);
    let mrf = random_tree(&mut r, 7, 2);
    let bp = BpConfig::default();
    let wide = explain(&mrf, NodeId(0), &EnumConfig::new(Some(8), None), &bp).unwrap();
    let wider = explain(&mrf, NodeId(0), &EnumConfig::new(Some(20), None), &bp).unwrap();
    assert_eq!(wide.records, wider.records);
}

#[test]
fn keyed_values_cover_every_visited_coalition() {
    let mrf = triangle();
    let explainer = Explainer::new(&mrf, EnumConfig::default(), BpConfig::default()).unwrap();
    let res = explainer
        .explain_with(NodeId(0), ExplainOptions { keep_values: true, ..Default::default() })
        .unwrap();
    let values = res.values.unwrap();
    for key in ["0-1", "0-1,1-2", "0-1,0-2", "0-2", "0-2,1-2"] {
        assert!(values.keys().any(|k: &CanonicalKey| k.to_string() == key), "{key}");
    }
}

#[test]
fn unknown_target_is_a_contract_error() {
    let mrf = triangle();
    assert!(explain(&mrf, NodeId(9), &EnumConfig::default(), &BpConfig::default()).is_err());
}
