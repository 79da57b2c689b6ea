//! Permutation test for detected community structure.
//!
//! The null distribution is built by randomizing the adjacency matrix, re-running the
//! same detector, and collecting its quality score. The observed score is then
//! summarized by a z-score and an add-one empirical p-value,
//! `p = (1 + #{null >= observed}) / (1 + N)`.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{Detector, QualityVariant};
use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Symmetrization};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullModel {
    /// Uniform shuffle of the upper-triangular adjacency entries.
    #[default]
    Shuffle,
    /// Double-edge swaps that keep every node's degree.
    DegreePreserving,
}

fn pair_from_index(mut k: usize, n: usize) -> (usize, usize) {
    // row-major enumeration of i < j
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Shuffles the strictly upper-triangular adjacency entries uniformly and mirrors
/// them: node and edge counts are kept, structure is destroyed.
pub fn permute_adjacency(g: &AdjacencyGraph, seed: u64) -> AdjacencyGraph {
    shuffle_edges(g, &mut rng_for(seed))
}

fn shuffle_edges(g: &AdjacencyGraph, rng: &mut ChaCha8Rng) -> AdjacencyGraph {
    let slots = g.n * g.n.saturating_sub(1) / 2;
    let mut edges: Vec<(usize, usize)> = index::sample(rng, slots, g.edges.len())
        .into_iter()
        .map(|k| pair_from_index(k, g.n))
        .collect();
    edges.sort_unstable();
    AdjacencyGraph {
        n: g.n,
        edges,
        labels: g.labels.clone(),
        arcs: None,
    }
}

/// Directed counterpart of [`permute_adjacency`]: shuffles the off-diagonal entries
/// of the directed kNN adjacency and rebuilds the undirected graph from them.
pub fn permute_arcs(g: &AdjacencyGraph, seed: u64) -> AdjacencyGraph {
    shuffle_arcs(g, &mut rng_for(seed))
}

fn shuffle_arcs(g: &AdjacencyGraph, rng: &mut ChaCha8Rng) -> AdjacencyGraph {
    let n = g.n;
    let arcs = g.directed_arcs();
    let arcs: Vec<(usize, usize)> = index::sample(rng, n * (n - 1), arcs.len())
        .into_iter()
        .map(|k| {
            let (i, r) = (k / (n - 1), k % (n - 1));
            (i, if r >= i { r + 1 } else { r })
        })
        .collect();
    let mut out = AdjacencyGraph::from_arcs(n, arcs, Symmetrization::Or).expect("arcs in range");
    out.labels = g.labels.clone();
    out
}

/// Degree-preserving randomization by `10 * m` attempted double-edge swaps.
pub fn rewire_degree_preserving(g: &AdjacencyGraph, seed: u64) -> AdjacencyGraph {
    rewire(g, &mut rng_for(seed))
}

fn rewire(g: &AdjacencyGraph, rng: &mut ChaCha8Rng) -> AdjacencyGraph {
    let mut edges = g.edges.clone();
    let mut present: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let m = edges.len();
    if m < 2 {
        return g.clone();
    }
    for _ in 0..10 * m {
        let x = rng.random_range(0..m);
        let y = rng.random_range(0..m);
        if x == y {
            continue;
        }
        let (a, b) = edges[x];
        let (c, d) = if rng.random::<bool>() {
            edges[y]
        } else {
            (edges[y].1, edges[y].0)
        };
        // (a,b),(c,d) -> (a,d),(c,b)
        if a == d || c == b {
            continue;
        }
        let e1 = (a.min(d), a.max(d));
        let e2 = (c.min(b), c.max(b));
        if e1 == e2 || present.contains(&e1) || present.contains(&e2) {
            continue;
        }
        present.remove(&edges[x]);
        present.remove(&edges[y]);
        present.insert(e1);
        present.insert(e2);
        edges[x] = e1;
        edges[y] = e2;
    }
    let mut edges: Vec<(usize, usize)> = present.into_iter().collect();
    edges.sort_unstable();
    AdjacencyGraph {
        n: g.n,
        edges,
        labels: g.labels.clone(),
        arcs: None,
    }
}

fn rewire_arcs(g: &AdjacencyGraph, rng: &mut ChaCha8Rng) -> AdjacencyGraph {
    let mut arcs = g.directed_arcs();
    let mut present: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
    let m = arcs.len();
    for _ in 0..10 * m {
        let x = rng.random_range(0..m);
        let y = rng.random_range(0..m);
        if x == y {
            continue;
        }
        let ((a, b), (c, d)) = (arcs[x], arcs[y]);
        if a == d || c == b || present.contains(&(a, d)) || present.contains(&(c, b)) {
            continue;
        }
        present.remove(&(a, b));
        present.remove(&(c, d));
        present.insert((a, d));
        present.insert((c, b));
        arcs[x] = (a, d);
        arcs[y] = (c, b);
    }
    let mut out = AdjacencyGraph::from_arcs(g.n, arcs, Symmetrization::Or).expect("arcs in range");
    out.labels = g.labels.clone();
    out
}

/// One randomized graph for the given null model. Directed quality functions get
/// their kNN arcs randomized; undirected ones get the symmetric adjacency randomized.
pub fn randomize(
    g: &AdjacencyGraph,
    detector: &Detector,
    model: NullModel,
    seed: u64,
) -> AdjacencyGraph {
    let mut rng = rng_for(seed);
    let directed = detector.variant == QualityVariant::Dugue && g.arcs.is_some();
    match (model, directed) {
        (NullModel::Shuffle, false) => shuffle_edges(g, &mut rng),
        (NullModel::Shuffle, true) => shuffle_arcs(g, &mut rng),
        (NullModel::DegreePreserving, false) => rewire(g, &mut rng),
        (NullModel::DegreePreserving, true) => rewire_arcs(g, &mut rng),
    }
}

/// Quality scores of `detector` on `iterations` independently randomized graphs.
///
/// Iteration `i` uses seed `seed + i` both for the randomization and for the
/// detector; results are ordered by iteration, so parallel and serial runs agree.
pub fn null_distribution(
    g: &AdjacencyGraph,
    detector: &Detector,
    iterations: usize,
    seed: u64,
    model: NullModel,
) -> Result<Vec<f64>> {
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "null distribution needs at least one iteration".into(),
        ));
    }
    (0..iterations as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let randomized = randomize(g, detector, model, s);
            detector.detect(&randomized, s).map(|p| p.quality)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    #[serde(rename = "observed_Q")]
    pub observed_q: f64,
    /// `None` when the null sample has zero variance.
    pub z: Option<f64>,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub significant: bool,
    pub null_summary: NullSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_model: Option<NullModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub null_samples: Vec<f64>,
}

impl SignificanceReport {
    pub fn z_defined(&self) -> bool {
        self.z.is_some()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// z-score (sample standard deviation) and one-sided add-one empirical p-value.
pub fn significance(observed: f64, null: &[f64]) -> Result<SignificanceReport> {
    if null.is_empty() {
        return Err(Error::InvalidParameter("null sample is empty".into()));
    }
    let n = null.len();
    let mean = null.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        null.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let std = var.sqrt();
    let z = (std > 0.0).then(|| (observed - mean) / std);
    let exceed = null.iter().filter(|&&x| x >= observed).count();
    let p = (1 + exceed) as f64 / (1 + n) as f64;
    Ok(SignificanceReport {
        observed_q: observed,
        z,
        p,
        n,
        significant: p < ALPHA,
        null_summary: NullSummary {
            mean,
            std,
            max: null.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        null_model: None,
        seed: None,
        null_samples: null.to_vec(),
    })
}

/// Detects on `g`, builds the null distribution and reports significance.
pub fn test_structure(
    g: &AdjacencyGraph,
    detector: &Detector,
    iterations: usize,
    seed: u64,
    model: NullModel,
) -> Result<SignificanceReport> {
    let observed = detector.detect(g, seed)?;
    let null = null_distribution(g, detector, iterations, seed.wrapping_add(1), model)?;
    let mut report = significance(observed.quality, &null)?;
    report.null_model = Some(model);
    report.seed = Some(seed);
    Ok(report)
}
