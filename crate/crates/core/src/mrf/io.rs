//! Plain-text MRF formats.
//!
//! * graph: one `u v` edge per line, `#` comments; an optional
//!   `# nodes: N` comment fixes the node count so trailing isolated nodes
//!   survive a round trip.
//! * priors: CSV with header `node,p_0,...,p_{c-1}`; nodes without a row get
//!   the uniform prior.
//! * potentials: JSON object with an optional `"global"` matrix applied to
//!   every edge and an optional `"edges"` map keyed by `"u,v"`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CompatibilityMatrix, Distribution, EdgeId, Mrf, MrfBuilder, NodeId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    global: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    edges: BTreeMap<String, Vec<Vec<f64>>>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

struct EdgeList {
    declared_nodes: Option<usize>,
    edges: Vec<(usize, usize)>,
}

fn parse_graph(path: &Path, text: &str) -> Result<EdgeList> {
    let mut declared_nodes = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("nodes:") {
                let n = n
                    .trim()
                    .parse()
                    .map_err(|_| parse_error(path, i + 1, "bad node count in header"))?;
                declared_nodes = Some(n);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut node = || -> Result<usize> {
            let tok = fields
                .next()
                .ok_or_else(|| parse_error(path, i + 1, "expected two node ids"))?;
            tok.parse()
                .map_err(|_| parse_error(path, i + 1, format!("invalid node id `{tok}`")))
        };
        let u = node()?;
        let v = node()?;
        if fields.next().is_some() {
            return Err(parse_error(path, i + 1, "trailing fields after edge"));
        }
        edges.push((u, v));
    }
    Ok(EdgeList {
        declared_nodes,
        edges,
    })
}

type PriorRows = (usize, Vec<(usize, usize, Vec<f64>)>);

fn parse_priors(path: &Path, text: &str) -> Result<PriorRows> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if header.get(0) != Some("node") || header.len() < 3 {
        return Err(parse_error(path, 1, "header must be node,p_0,...,p_{c-1}"));
    }
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("p_{k}") {
            return Err(parse_error(path, 1, format!("unexpected column `{name}`")));
        }
    }
    let classes = header.len() - 1;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let node: usize = record[0]
            .parse()
            .map_err(|_| parse_error(path, line, format!("invalid node id `{}`", &record[0])))?;
        let probs = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("invalid probability `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, node, probs));
    }
    Ok((classes, rows))
}

fn matrix<T: Scalar>(rows: &[Vec<f64>], subject: &str) -> Result<CompatibilityMatrix<T>> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|&x| T::of(x)).collect())
        .collect();
    CompatibilityMatrix::new(rows).map_err(|e| match e {
        Error::Validation { message, .. } => Error::validation(subject, message),
        other => other,
    })
}

fn parse_edge_key(key: &str) -> Option<(usize, usize)> {
    let (u, v) = key.split_once(',')?;
    Some((u.trim().parse().ok()?, v.trim().parse().ok()?))
}

/// Reads and validates an MRF from its three files.
pub fn load_mrf<T: Scalar>(
    graph_path: impl AsRef<Path>,
    priors_path: impl AsRef<Path>,
    potentials_path: impl AsRef<Path>,
) -> Result<Mrf<T>> {
    let (graph_path, priors_path, potentials_path) =
        (graph_path.as_ref(), priors_path.as_ref(), potentials_path.as_ref());
    let graph = parse_graph(graph_path, &read(graph_path)?)?;
    let (classes, prior_rows) = parse_priors(priors_path, &read(priors_path)?)?;
    let doc: PotentialsDoc = serde_json::from_str(&read(potentials_path)?)
        .map_err(|e| parse_error(potentials_path, e.line(), e.to_string()))?;

    let max_id = graph
        .edges
        .iter()
        .flat_map(|&(u, v)| [u, v])
        .chain(prior_rows.iter().map(|r| r.1))
        .max();
    let node_count = graph
        .declared_nodes
        .unwrap_or(0)
        .max(max_id.map_or(0, |m| m + 1));
    if let (Some(declared), Some(m)) = (graph.declared_nodes, max_id) {
        if m >= declared {
            return Err(Error::validation(
                format!("node {m}"),
                format!("exceeds declared node count {declared}"),
            ));
        }
    }

    let mut builder = MrfBuilder::<T>::new(node_count, classes);
    for (line, node, probs) in prior_rows {
        let subject = format!("prior of node {node} ({}:{line})", priors_path.display());
        if probs.len() != classes {
            return Err(Error::validation(subject, "wrong number of classes"));
        }
        let dist = Distribution::new(probs.into_iter().map(T::of).collect())
            .map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation(subject, message),
                other => other,
            })?;
        builder.set_prior(node, dist);
    }
    if let Some(global) = &doc.global {
        builder.set_shared_potential(matrix(global, "global potential")?);
    }

    let mut per_edge: BTreeMap<(usize, usize), (CompatibilityMatrix<T>, bool)> = BTreeMap::new();
    for (key, rows) in &doc.edges {
        let (u, v) = parse_edge_key(key).ok_or_else(|| {
            Error::validation(format!("potential key `{key}`"), "expected \"u,v\"")
        })?;
        let m = matrix(rows, &format!("potential of edge ({u},{v})"))?;
        per_edge.insert((u.min(v), u.max(v)), (m, u <= v));
    }

    for &(u, v) in &graph.edges {
        let pot = per_edge.remove(&(u.min(v), u.max(v))).map(|(m, keyed_low_first)| {
            // keys are in the user's order; store relative to the declared order
            if keyed_low_first == (u <= v) {
                m
            } else {
                m.transpose()
            }
        });
        builder.add_edge(u, v, pot);
    }
    if let Some((&(u, v), _)) = per_edge.iter().next() {
        return Err(Error::validation(
            format!("potential of edge ({u},{v})"),
            "edge not present in graph file",
        ));
    }
    builder.build()
}

/// Paths of the three files describing one MRF.
#[derive(Debug, Clone)]
pub struct MrfFiles {
    pub graph: PathBuf,
    pub priors: PathBuf,
    pub potentials: PathBuf,
}

impl MrfFiles {
    /// `graph.txt`, `priors.csv`, `potentials.json` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        MrfFiles {
            graph: dir.join("graph.txt"),
            priors: dir.join("priors.csv"),
            potentials: dir.join("potentials.json"),
        }
    }

    pub fn load<T: Scalar>(&self) -> Result<Mrf<T>> {
        load_mrf(&self.graph, &self.priors, &self.potentials)
    }
}

/// Writes the three files; loading them back yields the same model.
pub fn save_mrf<T: Scalar>(mrf: &Mrf<T>, files: &MrfFiles) -> Result<()> {
    let mut graph = format!("# nodes: {}\n", mrf.node_count());
    for &(u, v) in mrf.edges() {
        graph.push_str(&format!("{u} {v}\n"));
    }
    write(&files.graph, &graph)?;

    let mut priors = String::from("node");
    for k in 0..mrf.class_count() {
        priors.push_str(&format!(",p_{k}"));
    }
    priors.push('\n');
    for node in mrf.nodes() {
        let p = mrf.prior(node);
        if p.is_uniform() {
            continue;
        }
        priors.push_str(&node.to_string());
        for x in p.probs() {
            priors.push_str(&format!(",{}", x.as_f64()));
        }
        priors.push('\n');
    }
    write(&files.priors, &priors)?;

    let to_rows = |m: &CompatibilityMatrix<T>| -> Vec<Vec<f64>> {
        m.rows()
            .into_iter()
            .map(|r| r.into_iter().map(Scalar::as_f64).collect())
            .collect()
    };
    let mut doc = PotentialsDoc {
        global: mrf.shared_potential().map(to_rows),
        ..Default::default()
    };
    for (e, &(u, v)) in mrf.edges().iter().enumerate() {
        let id = EdgeId(e);
        if !mrf.uses_shared_potential(id) {
            doc.edges.insert(format!("{u},{v}"), to_rows(mrf.potential(id)));
        }
    }
    let json = serde_json::to_string_pretty(&doc).expect("potentials serialize");
    write(&files.potentials, &json)
}

impl<T: Scalar> Mrf<T> {
    /// Nodes whose prior is exactly uniform.
    pub fn uniform_prior_nodes(&self) -> Vec<NodeId> {
        self.nodes().filter(|&n| self.prior(n).is_uniform()).collect()
    }
}
