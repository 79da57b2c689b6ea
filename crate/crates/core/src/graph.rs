//! Binarized k-nearest-neighbour document graphs.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// How directed kNN arcs become undirected edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrization {
    /// Edge if either endpoint lists the other.
    #[default]
    Or,
    /// Edge only for mutual neighbours.
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    pub k: usize,
    pub symmetrization: Symmetrization,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            k: 4,
            symmetrization: Symmetrization::Or,
        }
    }
}

/// Simple undirected graph with sorted `(i, j)`, `i < j` edges.
///
/// When built from kNN lists the directed arcs are kept as well; directed quality
/// functions read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcs: Option<Vec<(usize, usize)>>,
}

impl AdjacencyGraph {
    /// Normalizes an arbitrary edge list: drops self-loops and duplicates, orders pairs.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) outside 0..{n}"
                )));
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Self {
            n,
            edges: set.into_iter().collect(),
            labels: None,
            arcs: None,
        })
    }

    /// Graph from directed arcs; `arcs` is retained in sorted, deduplicated form.
    pub fn from_arcs(
        n: usize,
        arcs: Vec<(usize, usize)>,
        symmetrization: Symmetrization,
    ) -> Result<Self> {
        let arc_set: BTreeSet<(usize, usize)> = arcs.into_iter().filter(|(a, b)| a != b).collect();
        let edges: Vec<(usize, usize)> = match symmetrization {
            Symmetrization::Or => arc_set.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
            Symmetrization::And => arc_set
                .iter()
                .filter(|&&(a, b)| a < b && arc_set.contains(&(b, a)))
                .copied()
                .collect(),
        };
        let mut g = Self::from_edges(n, edges)?;
        g.arcs = Some(arc_set.into_iter().collect());
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Directed arcs for directed quality functions: the stored kNN arcs when
    /// available, otherwise both orientations of every edge.
    pub fn directed_arcs(&self) -> Vec<(usize, usize)> {
        match &self.arcs {
            Some(arcs) => arcs.clone(),
            None => self
                .edges
                .iter()
                .flat_map(|&(a, b)| [(a, b), (b, a)])
                .collect(),
        }
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            writeln!(out, "{a} {b}").unwrap();
        }
        out
    }

    pub fn parse_edge_list(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace().map(str::parse::<usize>);
            match (parts.next(), parts.next()) {
                (Some(Ok(a)), Some(Ok(b))) => edges.push((a, b)),
                _ => {
                    return Err(Error::MalformedRecord {
                        line: i + 1,
                        msg: format!("expected \"i j\", found {line:?}"),
                    })
                }
            }
        }
        Self::from_edges(n, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let g: AdjacencyGraph = serde_json::from_str(&text)?;
        let mut normalized = Self::from_edges(g.n, g.edges)?;
        normalized.labels = g.labels;
        normalized.arcs = g.arcs;
        Ok(normalized)
    }

    /// Connected components as a node -> component id map (ids in order of first node).
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency_lists();
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// True when the nodes in `members` induce a connected subgraph.
    pub fn is_connected_subset(&self, members: &[usize]) -> bool {
        if members.len() <= 1 {
            return true;
        }
        let inside: HashSet<usize> = members.iter().copied().collect();
        let adj = self.adjacency_lists();
        let mut seen = HashSet::from([members[0]]);
        let mut stack = vec![members[0]];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if inside.contains(&v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == inside.len()
    }
}

/// Scales each nonzero row to unit Euclidean norm; zero rows stay zero.
pub fn normalize_rows(x: &EmbeddingMatrix) -> EmbeddingMatrix {
    let mut out = x.clone();
    for (i, mut row) in out.data.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            warn!("row {} ({}) is zero and cannot be normalized", i, x.ids[i]);
        } else {
            row /= norm;
        }
    }
    out
}

fn squared_euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn cosine_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - a.dot(&b) / (na * nb)
}

fn knn_by(
    data: &Array2<f64>,
    k: usize,
    dist: fn(ArrayView1<f64>, ArrayView1<f64>) -> f64,
) -> Vec<Vec<(usize, f64)>> {
    let n = data.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, dist(data.row(i), data.row(j))))
                .collect();
            cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            cand.truncate(k);
            cand
        })
        .collect()
}

/// Exact k nearest other rows by Euclidean distance, ties to the lower index.
/// Returned distances are Euclidean (not squared).
pub fn knn_euclidean(data: &Array2<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    let mut out = knn_by(data, k, squared_euclidean);
    for list in &mut out {
        for (_, d) in list.iter_mut() {
            *d = d.sqrt();
        }
    }
    out
}

/// Exact k nearest other rows by cosine distance, ties to the lower index.
pub fn knn_cosine(data: &Array2<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    knn_by(data, k, cosine_distance)
}

pub fn knn_graph(x: &EmbeddingMatrix, params: &GraphParams) -> Result<AdjacencyGraph> {
    let n = x.nrows();
    if params.k == 0 || params.k >= n {
        return Err(Error::out_of_range("k", params.k, format!("1..{n}")));
    }
    let lists = knn_euclidean(&x.data, params.k);
    let arcs = lists
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |&(j, _)| (i, j)))
        .collect();
    Ok(AdjacencyGraph::from_arcs(n, arcs, params.symmetrization)?.with_labels(x.ids.clone()))
}
