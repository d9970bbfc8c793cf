//! Faithfulness protocol and benchmarks.
//!
//! A ranking is judged by masking every prior to uniform, restoring the
//! priors of its top-ranked nodes, rerunning BP on the full topology, and
//! measuring the symmetric KL between the target's masked and original
//! beliefs. Lower is better.

mod bench;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    mc_sampling_shapley_with, pagerank_ranking, random_ranking, sensitivity_ranking_with, Method, Ranking,
};
use crate::bp::{compute_belief, run_bp, BpConfig, BpResult};
use crate::coalition::EnumConfig;
use crate::error::{Error, Result};
use crate::mrf::{Distribution, Mrf, NodeId};
use crate::scalar::Scalar;
use crate::shapley::{symmetric_kl, Explainer};

pub use bench::{d_sensitivity, speedup_benchmark, DSweepReport, DSweepRow, SpeedupReport, SpeedupRow};
pub use synthetic::{generate_synthetic, GraphKind, SyntheticConfig};

/// Settings shared by every ranking method in one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub enum_config: EnumConfig,
    pub bp_config: BpConfig,
    /// Base seed; stochastic methods use `seed + target`.
    pub seed: u64,
    pub mc_samples: usize,
    pub pagerank_damping: f64,
    pub pagerank_tol: f64,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            enum_config: EnumConfig::default(),
            bp_config: BpConfig::default(),
            seed: 0,
            mc_samples: 100,
            pagerank_damping: 0.85,
            pagerank_tol: 1e-10,
        }
    }
}

impl MethodSettings {
    pub fn seed_for(&self, target: NodeId) -> u64 {
        self.seed.wrapping_add(target.0 as u64)
    }
}

/// Protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub restore_fraction: f64,
    pub fractions: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            restore_fraction: 0.25,
            fractions: vec![0.05, 0.1, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        check_fraction(self.restore_fraction)?;
        for f in &self.fractions {
            check_fraction(*f)?;
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("fractions", "must be strictly ascending"));
        }
        Ok(())
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation("fraction", format!("{f} is outside (0, 1]")))
    }
}

/// Number of explaining variables restored for a fraction: `⌈f·(n−1)⌉`.
pub fn restored_count(fraction: f64, explaining: usize) -> usize {
    // guard against 0.3 * 10 = 3.0000000000000004
    let raw = fraction * explaining as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(explaining)
}

/// Symmetric KL between the target's reference belief and its belief on a
/// copy of `mrf` whose priors are uniform except for the target and the top
/// `⌈fraction·(n−1)⌉` nodes of `order`.
pub fn masked_fidelity<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    order: &[NodeId],
    fraction: f64,
    bp_config: &BpConfig,
    reference: &Distribution<T>,
) -> Result<T> {
    mrf.check_node(target)?;
    check_fraction(fraction)?;
    let explaining = mrf.node_count() - 1;
    let keep = restored_count(fraction, explaining);
    let uniform = Distribution::uniform(mrf.class_count());
    let mut priors = vec![uniform; mrf.node_count()];
    priors[target.0] = mrf.prior(target).clone();
    for &node in order.iter().filter(|&&n| n != target).take(keep) {
        mrf.check_node(node)?;
        priors[node.0] = mrf.prior(node).clone();
    }
    let masked = mrf.with_priors(priors)?;
    let run = run_bp(&masked, bp_config, None)?;
    let belief = compute_belief(&masked, &run.messages, target)?;
    symmetric_kl(reference, &belief)
}

/// Ranks the non-target nodes of `mrf` for `target` with `method`.
pub fn rank_with<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    method: Method,
    settings: &MethodSettings,
    reference: &BpResult<T>,
) -> Result<Ranking<T>> {
    let seed = settings.seed_for(target);
    match method {
        Method::Shapley => {
            let explainer = Explainer::with_reference(mrf, settings.enum_config, settings.bp_config, reference)?;
            Ok(Ranking::from(&explainer.explain(target)?))
        }
        Method::Random => random_ranking(mrf, target, seed),
        Method::Pagerank => pagerank_ranking(mrf, target, settings.pagerank_damping, settings.pagerank_tol),
        Method::Sensitivity => sensitivity_ranking_with(mrf, target, &settings.bp_config, reference),
        Method::McSampling => mc_sampling_shapley_with(
            mrf,
            target,
            &settings.enum_config,
            &settings.bp_config,
            settings.mc_samples,
            seed,
            reference,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub instance: usize,
    pub method: Method,
    pub target: NodeId,
    pub fraction: f64,
    pub sym_kl: f64,
    pub wall_ms: f64,
    pub msg_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub instance: usize,
    pub method: Method,
    pub target: NodeId,
    pub message: String,
}

/// Paired comparison of two methods at one fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub method: Method,
    pub baseline: Method,
    pub fraction: f64,
    pub pairs: usize,
    pub mean_method: f64,
    pub mean_baseline: f64,
    /// Share of pairs where `method` is at least as good as `baseline`.
    pub win_rate: f64,
    /// Paired t statistic of `baseline − method`; positive favors `method`.
    pub t_statistic: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub failures: Vec<CellFailure>,
}

impl EvalReport {
    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn fractions(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self.rows.iter().map(|r| r.fraction).collect();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }

    pub fn mean(&self, method: Method, fraction: f64) -> Option<f64> {
        mean(
            self.rows
                .iter()
                .filter(|r| r.method == method && r.fraction == fraction)
                .map(|r| r.sym_kl),
        )
    }

    /// Mean KL per instance for one method and fraction.
    pub fn instance_means(&self, method: Method, fraction: f64) -> BTreeMap<usize, f64> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.method == method && r.fraction == fraction) {
            let slot = acc.entry(r.instance).or_default();
            slot.0 += r.sym_kl;
            slot.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// Compares instance means when the report covers several instances,
    /// otherwise per-target values.
    pub fn compare(&self, method: Method, baseline: Method, fraction: f64) -> Option<PairedComparison> {
        let instances: Vec<usize> = {
            let mut v: Vec<usize> = self.rows.iter().map(|r| r.instance).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let pairs: Vec<(f64, f64)> = if instances.len() > 1 {
            let a = self.instance_means(method, fraction);
            let b = self.instance_means(baseline, fraction);
            a.iter()
                .filter_map(|(k, &x)| b.get(k).map(|&y| (x, y)))
                .collect()
        } else {
            let pick = |m: Method| -> BTreeMap<NodeId, f64> {
                self.rows
                    .iter()
                    .filter(|r| r.method == m && r.fraction == fraction)
                    .map(|r| (r.target, r.sym_kl))
                    .collect()
            };
            let (a, b) = (pick(method), pick(baseline));
            a.iter()
                .filter_map(|(k, &x)| b.get(k).map(|&y| (x, y)))
                .collect()
        };
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let diffs: Vec<f64> = pairs.iter().map(|(x, y)| y - x).collect();
        Some(PairedComparison {
            method,
            baseline,
            fraction,
            pairs: pairs.len(),
            mean_method: pairs.iter().map(|p| p.0).sum::<f64>() / n,
            mean_baseline: pairs.iter().map(|p| p.1).sum::<f64>() / n,
            win_rate: pairs.iter().filter(|(x, y)| x <= y).count() as f64 / n,
            t_statistic: paired_t_statistic(&diffs),
        })
    }

    /// `[instance,]method,target,fraction,sym_kl,wall_ms,msg_updates`; the
    /// instance column appears only when several instances are present.
    pub fn long_csv(&self) -> String {
        let multi = self.rows.iter().any(|r| r.instance != 0);
        let mut out = String::new();
        if multi {
            out.push_str("instance,");
        }
        out.push_str("method,target,fraction,sym_kl,wall_ms,msg_updates\n");
        for r in &self.rows {
            if multi {
                let _ = write!(out, "{},", r.instance);
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{}",
                r.method, r.target, r.fraction, r.sym_kl, r.wall_ms, r.msg_updates
            );
        }
        out
    }

    /// `method,fraction,mean_sym_kl` for plotting.
    pub fn fraction_sweep_csv(&self) -> String {
        let mut out = String::from("method,fraction,mean_sym_kl\n");
        for m in self.methods() {
            for f in self.fractions() {
                if let Some(mean) = self.mean(m, f) {
                    let _ = writeln!(out, "{m},{f},{mean}");
                }
            }
        }
        out
    }

    /// Fixed-width table of mean KL by method and fraction, followed by
    /// paired comparisons of `primary` against every other method.
    pub fn summary_table(&self, primary: Method) -> String {
        let fractions = self.fractions();
        let mut out = format!("{:<14}", "method");
        for f in &fractions {
            let _ = write!(out, " {:>10}", format!("f={f}"));
        }
        out.push('\n');
        for m in self.methods() {
            let _ = write!(out, "{:<14}", m.as_str());
            for &f in &fractions {
                match self.mean(m, f) {
                    Some(v) => {
                        let _ = write!(out, " {v:>10.4}");
                    }
                    None => {
                        let _ = write!(out, " {:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
        for m in self.methods().into_iter().filter(|&m| m != primary) {
            for &f in &fractions {
                if let Some(c) = self.compare(primary, m, f) {
                    let _ = writeln!(
                        out,
                        "{primary} vs {m} @ {f}: pairs={} win_rate={:.2} t={}",
                        c.pairs,
                        c.win_rate,
                        c.t_statistic.map_or("n/a".to_string(), |t| format!("{t:.3}"))
                    );
                }
            }
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "{} failed cells", self.failures.len());
        }
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `mean(d) / (sd(d) / √n)` over paired differences; `None` with fewer than
/// two pairs or zero variance.
pub fn paired_t_statistic(diffs: &[f64]) -> Option<f64> {
    let n = diffs.len();
    if n < 2 {
        return None;
    }
    let m = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var > 0.0).then(|| m / (var.sqrt() / (n as f64).sqrt()))
}

/// Every `(method, target, fraction)` cell of the protocol on one MRF.
/// Cells run in parallel; a failing cell is recorded and the sweep goes on.
pub fn sweep_fractions<T: Scalar>(
    mrf: &Mrf<T>,
    targets: &[NodeId],
    methods: &[Method],
    fractions: &[f64],
    settings: &MethodSettings,
) -> Result<EvalReport> {
    sweep_instance(0, mrf, targets, methods, fractions, settings)
}

/// As [`sweep_fractions`], tagging rows with an instance number.
pub fn sweep_instance<T: Scalar>(
    instance: usize,
    mrf: &Mrf<T>,
    targets: &[NodeId],
    methods: &[Method],
    fractions: &[f64],
    settings: &MethodSettings,
) -> Result<EvalReport> {
    for &f in fractions {
        check_fraction(f)?;
    }
    for &t in targets {
        mrf.check_node(t)?;
    }
    let reference = run_bp(mrf, &settings.bp_config, None)?;
    let cells: Vec<(Method, NodeId)> = methods
        .iter()
        .flat_map(|&m| targets.iter().map(move |&t| (m, t)))
        .collect();
    let outcomes: Vec<std::result::Result<Vec<EvalRow>, CellFailure>> = cells
        .par_iter()
        .map(|&(method, target)| {
            let fail = |e: Error| CellFailure {
                instance,
                method,
                target,
                message: e.to_string(),
            };
            let started = Instant::now();
            let ranking = rank_with(mrf, target, method, settings, &reference).map_err(fail)?;
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            let belief = compute_belief(mrf, &reference.messages, target).map_err(fail)?;
            fractions
                .iter()
                .map(|&fraction| {
                    let kl = masked_fidelity(mrf, target, &ranking.order, fraction, &settings.bp_config, &belief)
                        .map_err(fail)?;
                    Ok(EvalRow {
                        instance,
                        method,
                        target,
                        fraction,
                        sym_kl: kl.as_f64(),
                        wall_ms,
                        msg_updates: ranking.message_updates,
                    })
                })
                .collect()
        })
        .collect();
    let mut report = EvalReport::default();
    for o in outcomes {
        match o {
            Ok(rows) => report.rows.extend(rows),
            Err(f) => report.failures.push(f),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restored_count_rounds_up() {
        assert_eq!(restored_count(0.25, 49), 13);
        assert_eq!(restored_count(0.3, 10), 3);
        assert_eq!(restored_count(1.0, 9), 9);
        assert_eq!(restored_count(0.01, 9), 1);
    }

    #[test]
    fn t_statistic() {
        assert_eq!(paired_t_statistic(&[1.0]), None);
        assert_eq!(paired_t_statistic(&[1.0, 1.0]), None);
        // mean 2, sd 1, n 3 -> t = 2 / (1 / sqrt 3)
        let t = paired_t_statistic(&[1.0, 2.0, 3.0]).unwrap();
        assert!((t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eval_config_checks_fractions() {
        assert!(EvalConfig::default().validate().is_ok());
        let bad = EvalConfig {
            fractions: vec![0.5, 0.25],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvalConfig {
            restore_fraction: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
