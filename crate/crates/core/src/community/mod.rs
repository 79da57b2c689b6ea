//! Community detection on kNN document graphs.
//!
//! Three quality functions are supported:
//!
//! * Newman modularity on the undirected graph, `Q = sum_c (e_cc - a_c^2)`.
//! * Dugué's directed modularity on the kNN arcs,
//!   `Q = sum_c [L_c / m - out_c * in_c / m^2]` with `m` the number of arcs.
//! * The constant Potts model, `Q = sum_c [L_c - gamma * n_c (n_c - 1) / 2] / m`.
//!
//! Louvain and Leiden optimize any of them; label propagation ignores the quality
//! function and reports Newman modularity.

mod leiden;
mod louvain;
mod lpa;
mod network;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

pub use leiden::{leiden, leiden_with_starts};
pub use louvain::{louvain, louvain_with_starts};
pub use lpa::label_propagation;

/// Minimum quality improvement that counts as a move.
pub const GAIN_EPS: f64 = 1e-10;
/// Outer (aggregation) iterations for Louvain and Leiden.
pub const MAX_LEVELS: usize = 50;
pub const LPA_MAX_SWEEPS: usize = 100;
/// Default number of independent Louvain and Leiden starts. A single start can end
/// in a local optimum that no node or community move escapes; the best start is kept.
pub const DEFAULT_STARTS: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "name")]
pub enum QualityVariant {
    #[default]
    Newman,
    Dugue,
    Potts {
        resolution: f64,
    },
}

impl QualityVariant {
    pub fn potts() -> Self {
        QualityVariant::Potts { resolution: 1.0 }
    }

    // Negated comparison so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn parse(name: &str, resolution: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "newman" => Ok(QualityVariant::Newman),
            "dugue" | "dugué" => Ok(QualityVariant::Dugue),
            "potts" | "cpm" => {
                if !(resolution > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "resolution must be > 0, got {resolution}"
                    )));
                }
                Ok(QualityVariant::Potts { resolution })
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown quality variant {other:?}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QualityVariant::Newman => "newman",
            QualityVariant::Dugue => "dugue",
            QualityVariant::Potts { .. } => "potts",
        }
    }
}

impl fmt::Display for QualityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QualityVariant::Potts { resolution } => write!(f, "potts(resolution={resolution})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Louvain,
    Leiden,
    LabelPropagation,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Louvain => "louvain",
            Method::Leiden => "leiden",
            Method::LabelPropagation => "label-propagation",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A detection method paired with the quality function it optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub method: Method,
    pub variant: QualityVariant,
    /// Independent starts; ignored by label propagation.
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_starts() -> usize {
    DEFAULT_STARTS
}

impl Detector {
    pub fn new(method: Method, variant: QualityVariant) -> Self {
        Self {
            method,
            variant,
            starts: DEFAULT_STARTS,
        }
    }

    pub fn with_starts(self, starts: usize) -> Self {
        Self { starts, ..self }
    }

    pub fn detect(&self, g: &AdjacencyGraph, seed: u64) -> Result<Partition> {
        match self.method {
            Method::Louvain => louvain_with_starts(g, self.variant, seed, self.starts),
            Method::Leiden => leiden_with_starts(g, self.variant, seed, self.starts),
            Method::LabelPropagation => label_propagation(g, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community id per node, contiguous from 0 in order of first appearance.
    pub assignment: Vec<usize>,
    pub quality: f64,
    pub method: Method,
    pub variant: QualityVariant,
    pub seed: u64,
}

impl Partition {
    pub fn n_communities(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities()];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// `{"method", "variant", "Q", "communities": {"<id>": c}}`; ids fall back to node indices.
    pub fn to_json(&self, labels: Option<&[String]>) -> serde_json::Value {
        let communities: serde_json::Map<String, serde_json::Value> = self
            .assignment
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let key = labels.map_or_else(|| i.to_string(), |l| l[i].clone());
                (key, serde_json::Value::from(c))
            })
            .collect();
        let mut out = serde_json::json!({
            "method": self.method.name(),
            "variant": self.variant.name(),
            "Q": self.quality,
            "seed": self.seed,
            "n_communities": self.n_communities(),
            "communities": communities,
        });
        if let QualityVariant::Potts { resolution } = self.variant {
            out["resolution"] = resolution.into();
        }
        out
    }

    pub fn save_json(&self, path: impl AsRef<Path>, labels: Option<&[String]>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_json(labels))? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a partition written by [`Partition::save_json`], ordering nodes by `labels`.
    pub fn load_json(path: impl AsRef<Path>, labels: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
        let comms = v["communities"]
            .as_object()
            .ok_or_else(|| bad("missing communities"))?;
        let mut raw = Vec::with_capacity(labels.len());
        for label in labels {
            let c = comms
                .get(label)
                .and_then(|c| c.as_u64())
                .ok_or_else(|| bad(&format!("no community for {label}")))?;
            raw.push(c as usize);
        }
        let method = serde_json::from_value(v["method"].clone()).map_err(|_| bad("bad method"))?;
        let variant = QualityVariant::parse(
            v["variant"].as_str().unwrap_or("newman"),
            v["resolution"].as_f64().unwrap_or(1.0),
        )?;
        Ok(Partition {
            assignment: relabel(&raw),
            quality: v["Q"].as_f64().unwrap_or(f64::NAN),
            method,
            variant,
            seed: v["seed"].as_u64().unwrap_or(0),
        })
    }
}

/// Renumbers community ids to 0.. in order of first appearance.
pub fn relabel(raw: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    raw.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Quality of a node -> community assignment under `variant`.
pub fn modularity(
    g: &AdjacencyGraph,
    assignment: &[usize],
    variant: QualityVariant,
) -> Result<f64> {
    if assignment.len() != g.n {
        return Err(Error::PartitionMismatch(format!(
            "{} assignments for {} nodes",
            assignment.len(),
            g.n
        )));
    }
    if g.edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    match variant {
        QualityVariant::Newman => {
            let m = g.edges.len() as f64;
            let mut intra = vec![0.0; k];
            let mut degree = vec![0.0; k];
            for &(a, b) in &g.edges {
                if assignment[a] == assignment[b] {
                    intra[assignment[a]] += 1.0;
                }
                degree[assignment[a]] += 1.0;
                degree[assignment[b]] += 1.0;
            }
            Ok((0..k)
                .map(|c| intra[c] / m - (degree[c] / (2.0 * m)).powi(2))
                .sum())
        }
        QualityVariant::Dugue => {
            let arcs = g.directed_arcs();
            let m = arcs.len() as f64;
            let mut intra = vec![0.0; k];
            let mut out = vec![0.0; k];
            let mut inn = vec![0.0; k];
            for &(a, b) in &arcs {
                if assignment[a] == assignment[b] {
                    intra[assignment[a]] += 1.0;
                }
                out[assignment[a]] += 1.0;
                inn[assignment[b]] += 1.0;
            }
            Ok((0..k)
                .map(|c| intra[c] / m - out[c] * inn[c] / (m * m))
                .sum())
        }
        QualityVariant::Potts { resolution } => {
            let m = g.edges.len() as f64;
            let mut intra = vec![0.0; k];
            let mut size = vec![0.0; k];
            for &c in assignment {
                size[c] += 1.0;
            }
            for &(a, b) in &g.edges {
                if assignment[a] == assignment[b] {
                    intra[assignment[a]] += 1.0;
                }
            }
            Ok((0..k)
                .map(|c| intra[c] - resolution * size[c] * (size[c] - 1.0) / 2.0)
                .sum::<f64>()
                / m)
        }
    }
}

/// Splits every community into its connected components. Never lowers quality for
/// any supported variant.
pub(crate) fn split_disconnected(g: &AdjacencyGraph, assignment: &[usize]) -> Vec<usize> {
    let adj = g.adjacency_lists();
    let mut out = vec![usize::MAX; g.n];
    let mut next = 0;
    for start in 0..g.n {
        if out[start] != usize::MAX {
            continue;
        }
        out[start] = next;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if out[v] == usize::MAX && assignment[v] == assignment[u] {
                    out[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    relabel(&out)
}

/// Runs `start` `starts` times and keeps the highest quality, earliest on ties.
fn best_of_starts(
    starts: usize,
    mut start: impl FnMut() -> Result<Partition>,
) -> Result<Partition> {
    if starts == 0 {
        return Err(Error::out_of_range("starts", 0, ">= 1"));
    }
    let mut best = start()?;
    for _ in 1..starts {
        let p = start()?;
        if p.quality > best.quality + GAIN_EPS {
            best = p;
        }
    }
    Ok(best)
}

fn finish(
    g: &AdjacencyGraph,
    assignment: Vec<usize>,
    method: Method,
    variant: QualityVariant,
    seed: u64,
) -> Result<Partition> {
    let assignment = relabel(&assignment);
    let quality = modularity(g, &assignment, variant)?;
    Ok(Partition {
        assignment,
        quality,
        method,
        variant,
        seed,
    })
}
