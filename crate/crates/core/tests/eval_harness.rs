mod common;

use common::*;
use mrf_explain::eval::{d_sensitivity, paired_t_statistic, restored_count};
use mrf_explain::{
    compute_belief, generate_synthetic, masked_fidelity, run_bp, speedup_benchmark, sweep_fractions, BpConfig,
    CompatibilityMatrix, Distribution, EnumConfig, GraphKind, Method, MethodSettings, Mrf, NodeId,
    SyntheticConfig,
};
use proptest::prelude::*;

fn reference(mrf: &Mrf, target: NodeId) -> Distribution {
    let r = run_bp(mrf, &BpConfig::default(), None).unwrap();
    compute_belief(mrf, &r.messages, target).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_restoration_recovers_the_reference(seed in any::<u64>(), n in 2usize..12, extra in 0usize..5) {
        let mut r = rng(seed);
        let edges = random_connected_edges(&mut r, n, extra);
        let mrf = random_mrf(&mut r, n, 3, &edges);
        let target = NodeId(0);
        let order: Vec<NodeId> = mrf.nodes().skip(1).collect();
        let kl = masked_fidelity(&mrf, target, &order, 1.0, &BpConfig::default(), &reference(&mrf, target)).unwrap();
        prop_assert!(kl <= 1e-9);
    }

    #[test]
    fn restored_count_is_a_ceiling(f in 0.001f64..=1.0, n in 1usize..200) {
        let k = restored_count(f, n);
        prop_assert!(k <= n);
        prop_assert!(k as f64 >= f * n as f64 - 1e-6);
        prop_assert!((k as f64) < f * n as f64 + 1.0);
    }
}

#[test]
fn masking_is_a_no_op_for_uniform_priors() {
    let mut b = Mrf::builder(5, 2).shared_potential(CompatibilityMatrix::homophily(2, 0.8).unwrap());
    for i in 1..5 {
        b.add_edge(i - 1, i, None);
    }
    let mrf = b.build().unwrap();
    let order: Vec<NodeId> = (1..5).map(NodeId).collect();
    for f in [0.1, 0.5, 1.0] {
        let kl = masked_fidelity(&mrf, NodeId(0), &order, f, &BpConfig::default(), &reference(&mrf, NodeId(0))).unwrap();
        assert_eq!(kl, 0.0);
    }
}

#[test]
fn perfect_ranking_beats_the_worst_one() {
    // 10-node path; only nodes 1, 2 carry evidence
    let mut b = Mrf::builder(10, 2).shared_potential(CompatibilityMatrix::homophily(2, 0.9).unwrap());
    b.set_prior(1, Distribution::one_hot(2, 0));
    b.set_prior(2, Distribution::one_hot(2, 0));
    for i in 1..10 {
        b.add_edge(i - 1, i, None);
    }
    let mrf = b.build().unwrap();
    let target = NodeId(0);
    let belief = reference(&mrf, target);
    let perfect: Vec<NodeId> = (1..10).map(NodeId).collect();
    let worst: Vec<NodeId> = (1..10).rev().map(NodeId).collect();
    let bp = BpConfig::default();
    let good = masked_fidelity(&mrf, target, &perfect, 0.25, &bp, &belief).unwrap();
    let bad = masked_fidelity(&mrf, target, &worst, 0.25, &bp, &belief).unwrap();
    assert!(good < 1e-9 && bad > 0.1, "{good} vs {bad}");
}

#[test]
fn sweep_covers_every_cell() {
    let mrf = generate_synthetic::<f64>(&SyntheticConfig { nodes: 15, seed: 4, ..Default::default() }).unwrap();
    let targets = vec![NodeId(0), NodeId(3)];
    let methods = Method::ALL;
    let fractions = [0.25, 0.5, 1.0];
    let settings = MethodSettings { mc_samples: 20, ..Default::default() };
    let report = sweep_fractions(&mrf, &targets, &methods, &fractions, &settings).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.rows.len(), methods.len() * targets.len() * fractions.len());
    assert!(report.rows.iter().all(|r| r.sym_kl >= 0.0));
    for m in methods {
        assert!(report.mean(m, 1.0).unwrap() <= 1e-9);
    }
    let csv = report.long_csv();
    assert!(csv.starts_with("method,target,fraction,sym_kl,wall_ms,msg_updates\n"));
    assert_eq!(csv.lines().count(), report.rows.len() + 1);
    assert!(report.fraction_sweep_csv().starts_with("method,fraction,mean_sym_kl\n"));
    assert!(report.summary_table(Method::Shapley).contains("shapley"));
    let again = sweep_fractions(&mrf, &targets, &methods, &fractions, &settings).unwrap();
    let kl = |r: &mrf_explain::EvalReport| r.rows.iter().map(|x| x.sym_kl).collect::<Vec<_>>();
    assert_eq!(kl(&report), kl(&again));
}

#[test]
fn sweep_records_bad_targets_without_aborting() {
    let mrf = triangle();
    let settings = MethodSettings::default();
    assert!(sweep_fractions(&mrf, &[NodeId(7)], &[Method::Random], &[0.5], &settings).is_err());
    assert!(sweep_fractions(&mrf, &[NodeId(0)], &[Method::Random], &[0.0], &settings).is_err());
}

#[test]
fn speedup_on_paths() {
    let bp = BpConfig::default();
    let single = path(2, 2, 0.8);
    let r = speedup_benchmark(&single, NodeId(0), &EnumConfig::unbounded(), &bp).unwrap();
    assert_eq!(r.adaptive_updates, r.scratch_updates);
    let ten = path(10, 2, 0.8);
    let r = speedup_benchmark(&ten, NodeId(0), &EnumConfig::unbounded(), &bp).unwrap();
    assert!(r.adaptive_updates < r.scratch_updates);
    assert!(r.modes_agree(1e-6));
    assert_eq!(r.rows.last().unwrap().adaptive_cumulative, r.adaptive_updates);
    assert!(r.csv().starts_with("coalition_size,"));
}

#[test]
fn distance_sweep_restricts_and_saturates() {
    let mrf = path(6, 2, 0.85);
    let settings = MethodSettings { enum_config: EnumConfig::new(Some(3), None), ..Default::default() };
    let report = d_sensitivity(&mrf, &[NodeId(0)], &[2, 4, 8, 16], 0.25, &settings).unwrap();
    let row = |d| report.rows.iter().find(|r| r.max_distance == d).unwrap();
    assert_eq!(row(2).nonzero, 1);
    assert_eq!(row(8).sym_kl, row(16).sym_kl);
    assert_eq!(row(8).nonzero, row(16).nonzero);
    assert!(report.csv().starts_with("max_distance,mean_sym_kl\n"));
    assert!(d_sensitivity(&mrf, &[NodeId(0)], &[4, 2], 0.25, &settings).is_err());
}

#[test]
fn depth_three_tree_rankings_under_two_distances() {
    let mrf = generate_synthetic::<f64>(&SyntheticConfig { graph: GraphKind::Tree, nodes: 15, seed: 2, ..Default::default() })
        .unwrap();
    let settings = MethodSettings::default();
    let report = d_sensitivity(&mrf, &[NodeId(0)], &[2, 4], 0.25, &settings).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows[0].nonzero <= report.rows[1].nonzero);
}

#[test]
fn synthetic_generation_contracts() {
    let cfg = SyntheticConfig { graph: GraphKind::Tree, nodes: 50, classes: 3, seed: 12, ..Default::default() };
    let a = generate_synthetic::<f64>(&cfg).unwrap();
    let b = generate_synthetic::<f64>(&cfg).unwrap();
    assert_eq!(a.edges(), b.edges());
    assert_eq!(a.priors(), b.priors());

    let decoupled = generate_synthetic::<f64>(&SyntheticConfig { homophily: 1.0 / 3.0, ..cfg }).unwrap();
    let r = run_bp(&decoupled, &BpConfig::default(), None).unwrap();
    for v in decoupled.nodes() {
        let belief = compute_belief(&decoupled, &r.messages, v).unwrap();
        assert!(max_abs_diff(belief.probs(), decoupled.prior(v).probs()) < 1e-12);
    }
    assert!(generate_synthetic::<f64>(&SyntheticConfig { nodes: 1, ..cfg }).is_err());
    assert!(generate_synthetic::<f64>(&SyntheticConfig { classes: 1, ..cfg }).is_err());
}

#[test]
fn t_statistic_sign_favors_lower_kl() {
    assert!(paired_t_statistic(&[0.5, 0.7, 0.4]).unwrap() > 0.0);
}
