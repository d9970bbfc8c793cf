//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use mrf_explain::bp::all_beliefs;
use mrf_explain::eval::sweep_instance;
use mrf_explain::mrf::BRUTE_FORCE_MAX_STATES;
use mrf_explain::shapley::characteristic;
use mrf_explain::{
    brute_force_coalitions, brute_force_marginals, collect_coalitions, compute_belief, mc_sampling_shapley,
    run_bp, run_bp_view, CompatibilityMatrix, Distribution, Mrf, speedup_benchmark, BpConfig, CanonicalKey, EnumConfig, EvalMode, EvalReport,
    ExplainOptions, Explainer, Method, MethodSettings, MrfView, NodeId,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn tree_exactness() -> Outcome {
    let bp = BpConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let c = r.gen_range(2..=4);
        // largest n with c^n inside the oracle budget, capped at 12
        let max_n = (1..=12u32).take_while(|&n| (c as u64).pow(n) <= BRUTE_FORCE_MAX_STATES).last().unwrap();
        let n = r.gen_range(1..=max_n as usize);
        let mrf = random_tree(&mut r, n, c);
        let result = run_bp(&mrf, &bp, None).map_err(|e| format!("seed {seed}: {e}"))?;
        let beliefs = all_beliefs(&mrf, &result.messages).map_err(|e| e.to_string())?;
        let exact = brute_force_marginals(&mrf).map_err(|e| e.to_string())?;
        for (b, e) in beliefs.iter().zip(&exact) {
            worst = worst.max(max_abs_diff(b.probs(), e.probs()));
        }
    }
    check(
        worst <= 1e-8,
        format!("100 trees, max entry error {worst:.2e}"),
        format!("max entry error {worst:.2e} > 1e-8"),
    )
}

fn enumeration_correctness() -> Outcome {
    let grid: Vec<EnumConfig> = [Some(1), Some(2), Some(3), None]
        .iter()
        .flat_map(|&d| [Some(1), Some(2), Some(4), None].map(|c| EnumConfig::new(d, c)))
        .collect();
    let mut checked = 0;
    for seed in 0..200u64 {
        let mut r = rng(1000 + seed);
        let n = r.gen_range(2..=10);
        let extra = r.gen_range(0..=(20 - (n - 1)).min(8));
        let edges = random_connected_edges(&mut r, n, extra);
        let mrf = random_mrf(&mut r, n, 2, &edges);
        let target = NodeId(r.gen_range(0..n));
        let config = grid[seed as usize % grid.len()];
        let dfs: Vec<CanonicalKey> = collect_coalitions(&mrf, target, &config)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|c| c.key().clone())
            .collect();
        let unique: BTreeSet<CanonicalKey> = dfs.iter().cloned().collect();
        if unique.len() != dfs.len() {
            return Err(format!("seed {seed}: DFS visited a coalition twice"));
        }
        let brute = brute_force_coalitions(&mrf, target, &config).map_err(|e| e.to_string())?;
        if unique != brute {
            return Err(format!(
                "seed {seed} {config:?}: DFS found {} coalitions, brute force {}",
                unique.len(),
                brute.len()
            ));
        }
        checked += 1;
    }
    let tri = triangle();
    let keys: Vec<String> = collect_coalitions(&tri, NodeId(0), &EnumConfig::default())
        .map_err(|e| e.to_string())?
        .iter()
        .map(|c| c.key().to_string())
        .collect();
    let expected = ["0-1", "0-1,1-2", "0-1,0-2", "0-2", "0-2,1-2"];
    check(
        keys == expected,
        format!("{checked} graphs match brute force; triangle yields {}", keys.join(" | ")),
        format!("triangle coalitions {keys:?}"),
    )
}

fn incremental_fidelity() -> Outcome {
    let bp = BpConfig::default();
    let config = EnumConfig::new(Some(3), Some(6));
    let (mut worst_nu, mut worst_sv, mut values) = (0.0f64, 0.0f64, 0usize);
    for seed in 0..20u64 {
        let mut r = rng(2000 + seed);
        let n = r.gen_range(4..=12);
        let extra = r.gen_range(0..=4);
        let edges = random_connected_edges(&mut r, n, extra);
        let c = r.gen_range(2..=3);
        let mrf = random_mrf(&mut r, n, c, &edges);
        let target = NodeId(r.gen_range(0..n));
        let explainer = Explainer::new(&mrf, config, bp).map_err(|e| e.to_string())?;
        let reference = explainer.reference_belief(target).map_err(|e| e.to_string())?;
        let opts = |mode| ExplainOptions { mode, keep_values: true };
        let adaptive = explainer.explain_with(target, opts(EvalMode::Adaptive)).map_err(|e| e.to_string())?;
        let scratch = explainer.explain_with(target, opts(EvalMode::Scratch)).map_err(|e| e.to_string())?;
        for (key, &warm) in adaptive.values.as_ref().unwrap() {
            let edges: Vec<_> = key.edge_pairs().map(|(u, v)| mrf.find_edge(u, v).unwrap()).collect();
            let view = MrfView::restricted(&mrf, edges);
            let fresh = run_bp_view(&view, &bp, None).map_err(|e| e.to_string())?;
            let belief = compute_belief(&mrf, &fresh.messages, target).map_err(|e| e.to_string())?;
            let cold = characteristic(&reference, &belief).map_err(|e| e.to_string())?;
            worst_nu = worst_nu.max((warm - cold).abs());
            values += 1;
        }
        for (a, s) in adaptive.records.iter().zip(&scratch.records) {
            worst_sv = worst_sv.max((a.shapley_value - s.shapley_value).abs());
        }
    }
    check(
        worst_nu <= 1e-9 && worst_sv <= 1e-6,
        format!("{values} warm values, max ν gap {worst_nu:.2e}, max SV gap {worst_sv:.2e}"),
        format!("max ν gap {worst_nu:.2e} (limit 1e-9), max SV gap {worst_sv:.2e} (limit 1e-6)"),
    )
}

fn theorem_suite() -> Outcome {
    let bp = BpConfig::default();
    let cfg = EnumConfig::unbounded();
    let h = CompatibilityMatrix::homophily(2, 0.8).unwrap();
    let skew = Distribution::new(vec![0.8, 0.2]).unwrap();

    // (a) node 3 sits in its own component
    let mrf = Mrf::builder(4, 2)
        .shared_potential(h.clone())
        .prior(1, skew.clone())
        .prior(3, skew.clone())
        .edge(0, 1)
        .edge(1, 2)
        .build()
        .unwrap();
    let result = mrf_explain::explain(&mrf, NodeId(0), &cfg, &bp).map_err(|e| e.to_string())?;
    let independent = result.shapley_value(NodeId(3));
    if independent != 0.0 || result.coalition_count(NodeId(3)) != 0 {
        return Err(format!("(a) disconnected node has SV {independent}"));
    }

    // (b) node 1 is observed; nodes 2 and 3 lie beyond it
    let mrf = Mrf::builder(4, 2)
        .shared_potential(h.clone())
        .prior(1, Distribution::one_hot(2, 0))
        .prior(2, Distribution::new(vec![0.1, 0.9]).unwrap())
        .prior(3, skew.clone())
        .edge(0, 1)
        .edge(1, 2)
        .edge(2, 3)
        .build()
        .unwrap();
    let result = mrf_explain::explain(&mrf, NodeId(0), &cfg, &bp).map_err(|e| e.to_string())?;
    let blocked = result.shapley_value(NodeId(2)).abs().max(result.shapley_value(NodeId(3)).abs());
    if blocked > 1e-9 || result.shapley_value(NodeId(1)).abs() <= 1e-9 {
        return Err(format!("(b) SV beyond the observed cut is {blocked:.2e}"));
    }

    // (c) leaves 1 and 2 are interchangeable
    let mrf = Mrf::builder(4, 2)
        .shared_potential(h.clone())
        .prior(1, skew.clone())
        .prior(2, skew.clone())
        .prior(3, Distribution::new(vec![0.3, 0.7]).unwrap())
        .edge(0, 1)
        .edge(0, 2)
        .edge(0, 3)
        .build()
        .unwrap();
    let result = mrf_explain::explain(&mrf, NodeId(0), &cfg, &bp).map_err(|e| e.to_string())?;
    let twins = (result.shapley_value(NodeId(1)) - result.shapley_value(NodeId(2))).abs();
    if twins > 1e-12 {
        return Err(format!("(c) twins differ by {twins:.2e}"));
    }

    // (d) path 0-1-2: the SVs do not add up to ν(G) − ν(target only)
    let mrf = Mrf::builder(3, 2)
        .shared_potential(h)
        .prior(1, skew)
        .prior(2, Distribution::new(vec![0.1, 0.9]).unwrap())
        .edge(0, 1)
        .edge(1, 2)
        .build()
        .unwrap();
    let explainer = Explainer::new(&mrf, cfg, bp).map_err(|e| e.to_string())?;
    let reference = explainer.reference_belief(NodeId(0)).map_err(|e| e.to_string())?;
    let result = explainer.explain(NodeId(0)).map_err(|e| e.to_string())?;
    let total: f64 = result.records.iter().map(|r| r.shapley_value).sum();
    let target_only = characteristic(&reference, mrf.prior(NodeId(0))).map_err(|e| e.to_string())?;
    let full = characteristic(&reference, &reference).map_err(|e| e.to_string())?;
    let gap = (total - (full - target_only)).abs();
    check(
        gap > 1e-6,
        format!("independence, blocking, twins ({twins:.1e}) hold; additivity gap {gap:.3e}"),
        format!("(d) additivity gap {gap:.2e} not above 1e-6"),
    )
}

fn speedup() -> Outcome {
    let bp = BpConfig::default();
    let mut gaps = Vec::new();
    let mut detail = Vec::new();
    for len in [4, 6, 8, 10] {
        let mrf = path(len, 2, 0.8);
        let report = speedup_benchmark(&mrf, NodeId(0), &EnumConfig::unbounded(), &bp).map_err(|e| e.to_string())?;
        if report.adaptive_updates >= report.scratch_updates {
            return Err(format!(
                "path {len}: adaptive {} >= scratch {}",
                report.adaptive_updates, report.scratch_updates
            ));
        }
        if !report.modes_agree(1e-6) {
            return Err(format!("path {len}: SV gap {:.2e}", report.max_sv_difference));
        }
        gaps.push(report.scratch_updates - report.adaptive_updates);
        detail.push(format!("{len}:{}/{}", report.adaptive_updates, report.scratch_updates));
    }
    check(
        gaps.windows(2).all(|w| w[0] < w[1]),
        format!("adaptive/scratch updates {}", detail.join(" ")),
        format!("gap does not grow: {gaps:?}"),
    )
}

fn fidelity_ordering() -> Outcome {
    let settings = MethodSettings::default();
    let fractions = [0.05, 0.1, 0.25, 1.0];
    let mut report = EvalReport::default();
    for instance in 0..20u64 {
        let mrf = synthetic_suite(instance);
        let targets = mrf.uniform_prior_nodes();
        let r = sweep_instance(
            instance as usize,
            &mrf,
            &targets,
            &[Method::Shapley, Method::Random, Method::Pagerank, Method::Sensitivity, Method::McSampling],
            &fractions,
            &settings,
        )
        .map_err(|e| e.to_string())?;
        report.merge(r);
    }
    if !report.failures.is_empty() {
        return Err(format!("{} failed cells, first: {:?}", report.failures.len(), report.failures[0]));
    }
    let cmp = report.compare(Method::Shapley, Method::Random, 0.25).ok_or("no pairs")?;
    if cmp.mean_method > cmp.mean_baseline || cmp.win_rate < 0.9 {
        return Err(format!(
            "Shapley {:.4} vs Random {:.4}, win rate {:.2}",
            cmp.mean_method, cmp.mean_baseline, cmp.win_rate
        ));
    }
    for f in [0.05, 0.1, 0.25] {
        let random = report.mean(Method::Random, f).unwrap();
        if cmp.mean_method > random {
            return Err(format!("Shapley at 0.25 {:.4} above Random at {f} {random:.4}", cmp.mean_method));
        }
    }
    let anchor = report
        .rows
        .iter()
        .filter(|r| r.fraction == 1.0)
        .map(|r| r.sym_kl)
        .fold(0.0, f64::max);
    check(
        anchor <= 1e-9,
        format!(
            "20 instances: Shapley {:.4} vs Random {:.4} at 0.25, wins {:.0}%, fraction-1 max KL {anchor:.1e}",
            cmp.mean_method,
            cmp.mean_baseline,
            cmp.win_rate * 100.0
        ),
        format!("fraction-1 KL {anchor:.2e} > 1e-9"),
    )
}

fn mc_consistency() -> Outcome {
    let bp = BpConfig::default();
    let cfg = EnumConfig::default();
    let mut matches = 0;
    for seed in 0..20u64 {
        let mut r = rng(3000 + seed);
        let mrf = random_mrf(&mut r, 3, 2, &[(0, 1), (0, 2), (1, 2)]);
        let exact = mrf_explain::explain(&mrf, NodeId(0), &cfg, &bp).map_err(|e| e.to_string())?;
        let mc = mc_sampling_shapley(&mrf, NodeId(0), &cfg, &bp, 1000, seed).map_err(|e| e.to_string())?;
        if mc.order == exact.ranking {
            matches += 1;
        }
    }
    // standard error of the node-1 estimate across independent runs
    let mrf = triangle();
    let spread = |samples: usize| -> Result<f64, String> {
        let est: Vec<f64> = (0..30u64)
            .map(|s| {
                mc_sampling_shapley(&mrf, NodeId(0), &cfg, &bp, samples, 100 + s)
                    .map(|r| r.score(NodeId(1)).unwrap())
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        let m = est.iter().sum::<f64>() / est.len() as f64;
        Ok((est.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt())
    };
    let (se10, se100, se1000) = (spread(10)?, spread(100)?, spread(1000)?);
    check(
        matches >= 18 && se10 > se100 && se100 > se1000,
        format!("{matches}/20 rankings match; SE {se10:.2e} > {se100:.2e} > {se1000:.2e}"),
        format!("{matches}/20 rankings match; SE {se10:.2e}, {se100:.2e}, {se1000:.2e}"),
    )
}

fn characteristic_checks() -> Outcome {
    let d = |p: &[f64]| Distribution::new(p.to_vec()).unwrap();
    let (p, q) = (d(&[0.5, 0.5]), d(&[0.9, 0.1]));
    let same = characteristic(&q, &q).map_err(|e| e.to_string())?;
    let pq = characteristic(&p, &q).map_err(|e| e.to_string())?;
    let qp = characteristic(&q, &p).map_err(|e| e.to_string())?;
    // straight-line evaluation of -KL(p||q) - KL(q||p)
    let hand = -(0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln())
        - (0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln());
    check(
        same == 0.0 && pq == qp && (pq - hand).abs() < 1e-12 && (pq + 0.8789).abs() < 1e-3,
        format!("ν(b,b) = 0, symmetric, ν((0.5,0.5),(0.9,0.1)) = {pq:.4}"),
        format!("ν(b,b) = {same}, ν(p,q) = {pq}, ν(q,p) = {qp}, hand {hand}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 tree exactness", tree_exactness, Duration::from_secs(30)),
        ("2 enumeration correctness", enumeration_correctness, Duration::from_secs(60)),
        ("3 incremental-evaluation fidelity", incremental_fidelity, Duration::from_secs(120)),
        ("4 theorem suite", theorem_suite, Duration::from_secs(30)),
        ("5 speed-up property", speedup, Duration::from_secs(60)),
        ("6 fidelity ordering", fidelity_ordering, Duration::from_secs(600)),
        ("7 MC-sampling consistency", mc_consistency, Duration::from_secs(300)),
        ("8 characteristic function", characteristic_checks, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("acceptance {name}: {status} ({elapsed:.2?}) {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    }
}
