#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use topicnet::embedding::{EmbeddingMatrix, Provenance};
use topicnet::graph::{knn_graph, normalize_rows, AdjacencyGraph, GraphParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("RV {}.{}", i / 1000 + 1, i % 1000 + 1))
        .collect()
}

pub fn matrix(data: Array2<f64>) -> EmbeddingMatrix {
    EmbeddingMatrix::new(Provenance::Imported, ids(data.nrows()), data).unwrap()
}

pub fn gaussian_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(r))
}

/// `per` points around each of `k` centres drawn uniformly from `[-separation, separation]^dim`,
/// unit isotropic noise.
pub fn blobs(
    k: usize,
    per: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| r.random_range(-separation..separation))
                .collect()
        })
        .collect();
    let mut data = Array2::zeros((k * per, dim));
    let mut labels = Vec::with_capacity(k * per);
    for c in 0..k {
        for p in 0..per {
            let i = c * per + p;
            for d in 0..dim {
                let z: f64 = StandardNormal.sample(&mut r);
                data[(i, d)] = centres[c][d] + z;
            }
            labels.push(c);
        }
    }
    (data, labels)
}

/// Mean fraction of each point's `k` nearest neighbours sharing its label.
pub fn knn_purity(y: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    let n = y.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let s: f64 = y
                    .row(i)
                    .iter()
                    .zip(y.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (s, j)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        total += d[..k].iter().filter(|p| labels[p.1] == labels[i]).count() as f64 / k as f64;
    }
    total / n as f64
}

/// Singular values by one-sided Jacobi rotations, descending.
pub fn jacobi_singular_values(a: &Array2<f64>) -> Vec<f64> {
    let a = if a.nrows() < a.ncols() {
        a.t().to_owned()
    } else {
        a.clone()
    };
    let (m, n) = a.dim();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += cols[p][i] * cols[p][i];
                    beta += cols[q][i] * cols[q][i];
                    gamma += cols[p][i] * cols[q][i];
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Newman modularity straight from `Q = 1/2m Σ_ij (A_ij - k_i k_j / 2m) δ(c_i, c_j)`.
pub fn modularity_by_definition(n: usize, edges: &[(usize, usize)], assignment: &[usize]) -> f64 {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if assignment[i] == assignment[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Calls `f` with every set partition of `0..n` as a restricted-growth string.
pub fn for_each_partition(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(i: usize, n: usize, blocks: usize, a: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i == n {
            f(a);
            return;
        }
        for c in 0..=blocks {
            a[i] = c;
            rec(i + 1, n, blocks.max(c + 1), a, f);
        }
    }
    let mut a = vec![0; n];
    if n > 0 {
        rec(1, n, 1, &mut a, &mut f);
    }
}

pub fn brute_force_optimum(n: usize, edges: &[(usize, usize)]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_partition(n, |a| {
        best = best.max(modularity_by_definition(n, edges, a))
    });
    best
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Random connected G(n, p) graph, redrawn until connected.
pub fn random_connected(n: usize, p: f64, r: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    loop {
        let edges = gnp(n, p, r);
        if !edges.is_empty() && is_connected(n, &edges) {
            return edges;
        }
    }
}

pub fn gnp(n: usize, p: f64, r: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Planted partition: `blocks` equal blocks, edge probability `p_in` within and `p_out` across.
pub fn planted(n: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> AdjacencyGraph {
    let mut r = rng(seed);
    let size = n / blocks;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if i / size == j / size { p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    AdjacencyGraph::from_edges(n, edges).unwrap()
}

pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> AdjacencyGraph {
    AdjacencyGraph::from_edges(n, gnp(n, p, &mut rng(seed))).unwrap()
}

/// kNN graph of `n` random Gaussian points in `dim` dimensions, rows normalized.
pub fn random_knn_graph(n: usize, dim: usize, k: usize, seed: u64) -> AdjacencyGraph {
    let data = gaussian_matrix(n, dim, &mut rng(seed));
    knn_graph(
        &normalize_rows(&matrix(data)),
        &GraphParams {
            k,
            ..Default::default()
        },
    )
    .unwrap()
}

/// A pronounceable alphabetic pseudo-word, unique per `(topic, index)`.
pub fn pseudo_word(topic: usize, index: usize) -> String {
    const ONSETS: [&str; 10] = ["b", "d", "g", "k", "l", "m", "n", "r", "s", "t"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut w = String::from(["zor", "vel", "qua", "jin", "pyx", "hob", "wex", "fum"][topic % 8]);
    let mut x = index;
    for _ in 0..3 {
        w.push_str(ONSETS[x % 10]);
        x /= 10;
        w.push_str(VOWELS[x % 5]);
        x /= 5;
    }
    w
}

/// JSONL corpus of `topics` vocabulary-disjoint topics with `per_topic` documents each.
/// Documents draw 30-80 tokens from a Zipf-like distribution over their topic's words.
pub fn synthetic_corpus(
    topics: usize,
    per_topic: usize,
    vocab_per_topic: usize,
    seed: u64,
) -> (String, Vec<usize>) {
    let mut r = rng(seed);
    let weights: Vec<f64> = (1..=vocab_per_topic).map(|i| 1.0 / i as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut jsonl = String::new();
    let mut labels = Vec::new();
    for t in 0..topics {
        for d in 0..per_topic {
            let len = r.random_range(30..=80);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let mut u = r.random::<f64>() * total;
                    let mut i = 0;
                    while u >= weights[i] && i + 1 < weights.len() {
                        u -= weights[i];
                        i += 1;
                    }
                    pseudo_word(t, i)
                })
                .collect();
            jsonl.push_str(&format!(
                "{{\"book\": {}, \"hymn\": {}, \"text\": \"{}\"}}\n",
                t + 1,
                d + 1,
                words.join(" ")
            ));
            labels.push(t);
        }
    }
    (jsonl, labels)
}

/// Fraction of nodes whose community's majority label equals their own label.
pub fn cluster_purity(assignment: &[usize], labels: &[usize]) -> f64 {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let l = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; l]; k];
    for (&c, &t) in assignment.iter().zip(labels) {
        counts[c][t] += 1;
    }
    counts
        .iter()
        .map(|row| row.iter().max().copied().unwrap_or(0))
        .sum::<usize>() as f64
        / assignment.len() as f64
}
