use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{masked_fidelity, CellFailure, MethodSettings};
use crate::baselines::{Method, Ranking};
use crate::bp::{compute_belief, run_bp, BpConfig};
use crate::coalition::EnumConfig;
use crate::error::{Error, Result};
use crate::mrf::{Mrf, NodeId};
use crate::scalar::Scalar;
use crate::shapley::{EvalMode, ExplainOptions, Explainer};

/// Message updates spent on coalitions of one edge count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub coalition_size: usize,
    pub adaptive_updates: u64,
    pub scratch_updates: u64,
    pub adaptive_cumulative: u64,
    pub scratch_cumulative: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub target: NodeId,
    pub coalitions: usize,
    pub rows: Vec<SpeedupRow>,
    pub adaptive_updates: u64,
    pub scratch_updates: u64,
    pub adaptive_ms: f64,
    pub scratch_ms: f64,
    /// Largest SV difference between the two modes.
    pub max_sv_difference: f64,
}

impl SpeedupReport {
    /// `coalition_size,adaptive_updates,scratch_updates,adaptive_cumulative,scratch_cumulative`
    pub fn csv(&self) -> String {
        let mut out =
            String::from("coalition_size,adaptive_updates,scratch_updates,adaptive_cumulative,scratch_cumulative\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.coalition_size, r.adaptive_updates, r.scratch_updates, r.adaptive_cumulative, r.scratch_cumulative
            );
        }
        out
    }

    pub fn modes_agree(&self, tolerance: f64) -> bool {
        self.max_sv_difference <= tolerance
    }
}

/// Explains `target` twice, once with warm-started adaptive BP and once
/// rerunning BP from scratch on every coalition, and tabulates the work.
pub fn speedup_benchmark<T: Scalar>(
    mrf: &Mrf<T>,
    target: NodeId,
    enum_config: &EnumConfig,
    bp_config: &BpConfig,
) -> Result<SpeedupReport> {
    let explainer = Explainer::new(mrf, *enum_config, *bp_config)?;
    let run = |mode| {
        let started = Instant::now();
        let result = explainer.explain_with(target, ExplainOptions { mode, keep_values: false })?;
        Ok::<_, Error>((result, started.elapsed().as_secs_f64() * 1e3))
    };
    let (adaptive, adaptive_ms) = run(EvalMode::Adaptive)?;
    let (scratch, scratch_ms) = run(EvalMode::Scratch)?;

    let max_sv_difference = adaptive
        .records
        .iter()
        .zip(&scratch.records)
        .map(|(a, s)| (a.shapley_value - s.shapley_value).abs().as_f64())
        .fold(0.0, f64::max);
    let by_size_a = &adaptive.diagnostics.updates_by_size;
    let by_size_s = &scratch.diagnostics.updates_by_size;
    let sizes = by_size_a.len().max(by_size_s.len());
    let (mut cum_a, mut cum_s) = (0, 0);
    let rows = (0..sizes)
        .map(|size| {
            let a = by_size_a.get(size).copied().unwrap_or(0);
            let s = by_size_s.get(size).copied().unwrap_or(0);
            cum_a += a;
            cum_s += s;
            SpeedupRow {
                coalition_size: size,
                adaptive_updates: a,
                scratch_updates: s,
                adaptive_cumulative: cum_a,
                scratch_cumulative: cum_s,
            }
        })
        .collect();
    Ok(SpeedupReport {
        target,
        coalitions: adaptive.diagnostics.coalitions,
        rows,
        adaptive_updates: adaptive.diagnostics.message_updates,
        scratch_updates: scratch.diagnostics.message_updates,
        adaptive_ms,
        scratch_ms,
        max_sv_difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DSweepRow {
    pub max_distance: usize,
    pub target: NodeId,
    pub sym_kl: f64,
    /// Explaining variables with a nonzero SV.
    pub nonzero: usize,
    pub wall_ms: f64,
    pub msg_updates: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DSweepReport {
    pub fraction: f64,
    pub rows: Vec<DSweepRow>,
    pub failures: Vec<CellFailure>,
}

impl DSweepReport {
    pub fn mean(&self, max_distance: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.max_distance == max_distance)
            .map(|r| r.sym_kl)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn distances(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.rows.iter().map(|r| r.max_distance).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// `max_distance,mean_sym_kl`
    pub fn csv(&self) -> String {
        let mut out = String::from("max_distance,mean_sym_kl\n");
        for d in self.distances() {
            if let Some(m) = self.mean(d) {
                let _ = writeln!(out, "{d},{m}");
            }
        }
        out
    }
}

/// Masked fidelity of Shapley rankings at `settings`' complexity bound
/// for each maximum distance in `d_values`.
pub fn d_sensitivity<T: Scalar>(
    mrf: &Mrf<T>,
    targets: &[NodeId],
    d_values: &[usize],
    fraction: f64,
    settings: &MethodSettings,
) -> Result<DSweepReport> {
    if d_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("d values", "must be strictly ascending"));
    }
    for &t in targets {
        mrf.check_node(t)?;
    }
    let reference = run_bp(mrf, &settings.bp_config, None)?;
    let cells: Vec<(usize, NodeId)> = d_values
        .iter()
        .flat_map(|&d| targets.iter().map(move |&t| (d, t)))
        .collect();
    let outcomes: Vec<std::result::Result<DSweepRow, CellFailure>> = cells
        .par_iter()
        .map(|&(d, target)| {
            let fail = |e: Error| CellFailure {
                instance: d,
                method: Method::Shapley,
                target,
                message: e.to_string(),
            };
            let enum_config = EnumConfig::new(Some(d), settings.enum_config.max_complexity);
            let started = Instant::now();
            let explainer =
                Explainer::with_reference(mrf, enum_config, settings.bp_config, &reference).map_err(fail)?;
            let result = explainer.explain(target).map_err(fail)?;
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            let ranking = Ranking::from(&result);
            let belief = compute_belief(mrf, &reference.messages, target).map_err(fail)?;
            let kl = masked_fidelity(mrf, target, &ranking.order, fraction, &settings.bp_config, &belief)
                .map_err(fail)?;
            Ok(DSweepRow {
                max_distance: d,
                target,
                sym_kl: kl.as_f64(),
                nonzero: result.records.iter().filter(|r| r.shapley_value != T::zero()).count(),
                wall_ms,
                msg_updates: result.diagnostics.message_updates,
            })
        })
        .collect();
    let mut report = DSweepReport {
        fraction,
        ..Default::default()
    };
    for o in outcomes {
        match o {
            Ok(row) => report.rows.push(row),
            Err(f) => report.failures.push(f),
        }
    }
    Ok(report)
}
