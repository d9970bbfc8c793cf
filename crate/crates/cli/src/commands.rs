use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mrf_explain::bp::all_beliefs;
use mrf_explain::eval::sweep_instance;
use mrf_explain::{
    d_sensitivity, generate_synthetic, load_mrf, rank_with, run_bp, save_mrf, speedup_benchmark, Error,
    EvalReport, ExplanationResult, Explainer, MethodSettings, Mrf, MrfFiles, NodeId, Ranking, Result,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::Format;
use crate::config::{RunConfig, Subcommand, Targets};

/// Per-target failures of a run that otherwise completed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<(String, Error)>,
}

impl Outcome {
    fn fail(&mut self, what: impl Into<String>, error: Error) {
        let what = what.into();
        eprintln!("error: {what}: {error}");
        self.failures.push((what, error));
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Contract(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    create_dir(&config.out)?;
    write_json(&config.out.join("config.json"), config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match config.subcommand {
        Subcommand::Infer => infer(config),
        Subcommand::Explain => explain(config),
        Subcommand::Baseline => baseline(config),
        Subcommand::Eval => eval(config),
        Subcommand::Bench => bench(config),
        Subcommand::Generate => generate(config),
    })
}

fn models(config: &RunConfig) -> Result<Vec<Mrf>> {
    if let Some(inputs) = &config.inputs {
        return Ok(vec![load_mrf(&inputs.graph, &inputs.priors, &inputs.potentials)?]);
    }
    let suite = config
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::Contract("run has neither input files nor a synthetic suite".into()))?;
    (0..suite.instances)
        .map(|i| {
            let mut model = suite.model;
            model.seed = model.seed.wrapping_add(i as u64);
            generate_synthetic(&model)
        })
        .collect()
}

fn single_model(config: &RunConfig) -> Result<Mrf> {
    let mut all = models(config)?;
    if all.len() != 1 {
        return Err(Error::Validation {
            subject: "synthetic".into(),
            message: "this subcommand works on one model; use --synthetic 1".into(),
        });
    }
    Ok(all.remove(0))
}

fn targets(config: &RunConfig, mrf: &Mrf) -> Result<Vec<NodeId>> {
    let list = match &config.targets {
        Targets::AllUniformPriorNodes => mrf.uniform_prior_nodes(),
        Targets::List(ids) => ids.iter().map(|&i| NodeId(i)).collect(),
    };
    if let Some(bad) = list.iter().find(|t| !mrf.contains_node(**t)) {
        return Err(Error::Validation {
            subject: format!("target {bad}"),
            message: format!("the model has {} nodes", mrf.node_count()),
        });
    }
    if list.is_empty() {
        eprintln!("warning: no targets selected");
    }
    Ok(list)
}

fn settings(config: &RunConfig) -> MethodSettings {
    MethodSettings {
        enum_config: config.enumeration,
        bp_config: config.bp,
        seed: config.seed,
        mc_samples: config.samples,
        ..Default::default()
    }
}

#[derive(Serialize)]
struct Convergence {
    converged: bool,
    iterations_used: usize,
    message_updates: u64,
    final_change: f64,
}

#[derive(Serialize)]
struct BeliefRow<'a> {
    node: NodeId,
    belief: &'a [f64],
}

fn infer(config: &RunConfig) -> Result<Outcome> {
    let mrf = single_model(config)?;
    let result = run_bp(&mrf, &config.bp, None)?;
    if !result.converged {
        eprintln!(
            "warning: BP stopped after {} iterations with change {:.3e}",
            result.iterations_used, result.final_change
        );
    }
    let beliefs = all_beliefs(&mrf, &result.messages)?;
    match config.format {
        Format::Csv => {
            let mut out = String::from("node");
            for k in 0..mrf.class_count() {
                let _ = write!(out, ",b_{k}");
            }
            out.push('\n');
            for (node, b) in beliefs.iter().enumerate() {
                let _ = write!(out, "{node}");
                for p in b.probs() {
                    let _ = write!(out, ",{p}");
                }
                out.push('\n');
            }
            write(&config.out.join("beliefs.csv"), &out)?;
        }
        Format::Json => {
            let rows: Vec<BeliefRow> = beliefs
                .iter()
                .enumerate()
                .map(|(i, b)| BeliefRow {
                    node: NodeId(i),
                    belief: b.probs(),
                })
                .collect();
            write_json(&config.out.join("beliefs.json"), &rows)?;
        }
    }
    write_json(
        &config.out.join("convergence.json"),
        &Convergence {
            converged: result.converged,
            iterations_used: result.iterations_used,
            message_updates: result.message_updates,
            final_change: result.final_change,
        },
    )?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct RankedRow {
    node: NodeId,
    score: f64,
    coalition_count: usize,
}

fn ranked_rows(ranking: &Ranking) -> Vec<RankedRow> {
    ranking
        .order
        .iter()
        .map(|&node| {
            let i = ranking
                .scores
                .binary_search_by_key(&node, |s| s.0)
                .expect("ranked node has a score");
            RankedRow {
                node,
                score: ranking.scores[i].1,
                coalition_count: ranking.scores[i].2,
            }
        })
        .collect()
}

fn write_explanation(config: &RunConfig, result: &ExplanationResult) -> Result<()> {
    let t = result.target;
    let rows = ranked_rows(&Ranking::from(result));
    match config.format {
        Format::Csv => {
            let mut out = String::from("node,shapley_value,coalition_count\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{}", r.node, r.score, r.coalition_count);
            }
            write(&config.out.join(format!("explain_{t}.csv")), &out)?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                target: NodeId,
                rows: &'a [RankedRow],
            }
            write_json(&config.out.join(format!("explain_{t}.json")), &Doc { target: t, rows: &rows })?;
        }
    }
    write_json(
        &config.out.join(format!("explain_{t}_diagnostics.json")),
        &result.diagnostics,
    )
}

fn explain(config: &RunConfig) -> Result<Outcome> {
    let mrf = single_model(config)?;
    let targets = targets(config, &mrf)?;
    let explainer = Explainer::new(&mrf, config.enumeration, config.bp)?;
    let results: Vec<(NodeId, Result<ExplanationResult>)> =
        targets.par_iter().map(|&t| (t, explainer.explain(t))).collect();
    let mut outcome = Outcome::default();
    for (t, r) in results {
        match r {
            Ok(result) => write_explanation(config, &result)?,
            Err(e) => outcome.fail(format!("target {t}"), e),
        }
    }
    Ok(outcome)
}

fn baseline(config: &RunConfig) -> Result<Outcome> {
    let mrf = single_model(config)?;
    let targets = targets(config, &mrf)?;
    let method = config.methods[0];
    let settings = settings(config);
    let reference = run_bp(&mrf, &config.bp, None)?;
    let results: Vec<(NodeId, Result<Ranking>)> = targets
        .par_iter()
        .map(|&t| (t, rank_with(&mrf, t, method, &settings, &reference)))
        .collect();
    let mut outcome = Outcome::default();
    for (t, r) in results {
        let ranking = match r {
            Ok(r) => r,
            Err(e) => {
                outcome.fail(format!("target {t}"), e);
                continue;
            }
        };
        let rows = ranked_rows(&ranking);
        match config.format {
            Format::Csv => {
                let mut out = String::from("method,node,score,coalition_count\n");
                for r in &rows {
                    let _ = writeln!(out, "{method},{},{},{}", r.node, r.score, r.coalition_count);
                }
                write(&config.out.join(format!("baseline_{method}_{t}.csv")), &out)?;
            }
            Format::Json => write_json(&config.out.join(format!("baseline_{method}_{t}.json")), &ranking)?,
        }
    }
    Ok(outcome)
}

fn eval(config: &RunConfig) -> Result<Outcome> {
    let settings = settings(config);
    let mut report = EvalReport::default();
    for (i, mrf) in models(config)?.iter().enumerate() {
        let targets = targets(config, mrf)?;
        report.merge(sweep_instance(i, mrf, &targets, &config.methods, &config.fractions, &settings)?);
    }
    let mut outcome = Outcome::default();
    for f in std::mem::take(&mut report.failures) {
        outcome.fail(
            format!("instance {} method {} target {}", f.instance, f.method, f.target),
            Error::Numerical(f.message.clone()),
        );
        report.failures.push(f);
    }
    match config.format {
        Format::Csv => write(&config.out.join("eval_long.csv"), &report.long_csv())?,
        Format::Json => write_json(&config.out.join("eval_long.json"), &report)?,
    }
    write(&config.out.join("fig_fraction_sweep.csv"), &report.fraction_sweep_csv())?;
    let primary = config.methods[0];
    write(&config.out.join("summary.txt"), &report.summary_table(primary))?;
    Ok(outcome)
}

fn bench(config: &RunConfig) -> Result<Outcome> {
    let mrf = single_model(config)?;
    let targets = targets(config, &mrf)?;
    let mut outcome = Outcome::default();
    let mut curve = String::from(
        "target,coalition_size,adaptive_updates,scratch_updates,adaptive_cumulative,scratch_cumulative\n",
    );
    let mut summary = String::from("target coalitions adaptive_updates scratch_updates adaptive_ms scratch_ms max_sv_diff\n");
    let results: Vec<_> = targets
        .par_iter()
        .map(|&t| (t, speedup_benchmark(&mrf, t, &config.enumeration, &config.bp)))
        .collect();
    for (t, r) in results {
        match r {
            Ok(report) => {
                for row in report.csv().lines().skip(1) {
                    let _ = writeln!(curve, "{t},{row}");
                }
                let _ = writeln!(
                    summary,
                    "{t} {} {} {} {:.3} {:.3} {:.3e}",
                    report.coalitions,
                    report.adaptive_updates,
                    report.scratch_updates,
                    report.adaptive_ms,
                    report.scratch_ms,
                    report.max_sv_difference
                );
            }
            Err(e) => outcome.fail(format!("target {t}"), e),
        }
    }
    write(&config.out.join("fig_speedup.csv"), &curve)?;
    if !config.d_values.is_empty() {
        let report = d_sensitivity(&mrf, &targets, &config.d_values, config.fraction, &settings(config))?;
        for f in &report.failures {
            outcome.fail(
                format!("distance {} target {}", f.instance, f.target),
                Error::Numerical(f.message.clone()),
            );
        }
        write(&config.out.join("fig_d_sweep.csv"), &report.csv())?;
        summary.push_str("\nmax_distance mean_sym_kl\n");
        for d in report.distances() {
            if let Some(m) = report.mean(d) {
                let _ = writeln!(summary, "{d} {m:.6}");
            }
        }
    }
    write(&config.out.join("summary.txt"), &summary)?;
    Ok(outcome)
}

fn generate(config: &RunConfig) -> Result<Outcome> {
    let all = models(config)?;
    let many = all.len() > 1;
    for (i, mrf) in all.iter().enumerate() {
        let dir: PathBuf = if many {
            config.out.join(format!("instance_{i}"))
        } else {
            config.out.clone()
        };
        create_dir(&dir)?;
        save_mrf(mrf, &MrfFiles::in_dir(&dir))?;
    }
    Ok(Outcome::default())
}
