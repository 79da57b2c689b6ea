//! UMAP reduction: exact kNN, smoothed fuzzy memberships, fuzzy union,
//! spectral initialization and a negative-sampling SGD layout.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, Provenance};
use crate::error::{Error, Result};
use crate::graph::knn_euclidean;

const SIGMA_TOL: f64 = 1e-5;
const SIGMA_ITERS: usize = 64;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const GRAD_CLIP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceParams {
    pub n_neighbours: usize,
    pub n_components: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ReduceParams {
    fn default() -> Self {
        Self {
            n_neighbours: 8,
            n_components: 10,
            min_dist: 0.0,
            spread: 1.0,
            n_epochs: 500,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

impl ReduceParams {
    pub fn validate(&self, n: usize, dim: usize) -> Result<()> {
        if self.n_neighbours < 2 || self.n_neighbours >= n {
            return Err(Error::out_of_range(
                "n_neighbours",
                self.n_neighbours,
                format!("2..{n}"),
            ));
        }
        if self.n_components < 1 || self.n_components >= dim {
            return Err(Error::out_of_range(
                "n_components",
                self.n_components,
                format!("1..{dim}"),
            ));
        }
        if !(self.min_dist >= 0.0 && self.min_dist.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "min_dist must be >= 0, got {}",
                self.min_dist
            )));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spread must be > 0, got {}",
                self.spread
            )));
        }
        if self.n_epochs == 0 {
            return Err(Error::out_of_range("n_epochs", 0, ">= 1"));
        }
        Ok(())
    }
}

/// Least-squares fit of `1 / (1 + a x^(2b))` to the offset exponential
/// `1` for `x < min_dist`, `exp(-(x - min_dist) / spread)` otherwise.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2))
            .sum()
    };

    // Levenberg-Marquardt on two parameters
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let mut err = sse(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let f = 1.0 / (1.0 + a * p);
            let r = f - y;
            let ja = -p * f * f;
            let jb = -a * p * 2.0 * x.ln() * f * f;
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jb;
            jtj[1][1] += jb * jb;
            jtr[0] += ja * r;
            jtr[1] += jb * r;
        }
        let m00 = jtj[0][0] * (1.0 + lambda);
        let m11 = jtj[1][1] * (1.0 + lambda);
        let det = m00 * m11 - jtj[0][1] * jtj[0][1];
        if det.abs() < f64::MIN_POSITIVE {
            break;
        }
        let da = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let db = -(m00 * jtr[1] - jtj[0][1] * jtr[0]) / det;
        let (na, nb) = (a + da, b + db);
        let new_err = if na > 0.0 && nb > 0.0 {
            sse(na, nb)
        } else {
            f64::INFINITY
        };
        if new_err < err {
            let done =
                (err - new_err) <= 1e-15 * err.max(1e-300) && da.abs() < 1e-12 && db.abs() < 1e-12;
            a = na;
            b = nb;
            err = new_err;
            lambda = (lambda / 10.0).max(1e-12);
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// Nearest-neighbour distance `rho` and bandwidth `sigma` per point, given distances
/// to the `k - 1` nearest other points.
fn smooth_knn(dists: &[Vec<f64>], k: usize) -> Vec<(f64, f64)> {
    let target = (k as f64).log2();
    let mean_all = {
        let (s, c) = dists
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), &d| (s + d, c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    };
    dists
        .par_iter()
        .map(|row| {
            let rho = row.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
            for _ in 0..SIGMA_ITERS {
                let psum: f64 = row
                    .iter()
                    .map(|&d| {
                        let d = d - rho;
                        if d > 0.0 {
                            (-d / mid).exp()
                        } else {
                            1.0
                        }
                    })
                    .sum();
                if (psum - target).abs() < SIGMA_TOL {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    mid = if hi.is_infinite() {
                        mid * 2.0
                    } else {
                        (lo + hi) / 2.0
                    };
                }
            }
            let mean_row = if row.is_empty() {
                0.0
            } else {
                row.iter().sum::<f64>() / row.len() as f64
            };
            let floor = MIN_K_DIST_SCALE * if rho > 0.0 { mean_row } else { mean_all };
            (rho, mid.max(floor))
        })
        .collect()
}

/// Symmetric fuzzy graph as a sorted list of `(i, j, w)` with both orientations.
fn fuzzy_graph(data: &Array2<f64>, k: usize) -> Vec<(usize, usize, f64)> {
    let n = data.nrows();
    let knn = knn_euclidean(data, k - 1);
    let dists: Vec<Vec<f64>> = knn
        .iter()
        .map(|l| l.iter().map(|p| p.1).collect())
        .collect();
    let params = smooth_knn(&dists, k);
    let mut directed = std::collections::BTreeMap::new();
    for (i, list) in knn.iter().enumerate() {
        let (rho, sigma) = params[i];
        for &(j, d) in list {
            let w = if d - rho <= 0.0 || sigma == 0.0 {
                1.0
            } else {
                (-(d - rho) / sigma).exp()
            };
            directed.insert((i, j), w);
        }
    }
    let mut out = Vec::with_capacity(2 * directed.len());
    for (&(i, j), &w) in &directed {
        let wt = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let u = w + wt - w * wt;
        out.push((i, j, u));
        if wt == 0.0 {
            out.push((j, i, u));
        }
    }
    out.sort_by_key(|e| (e.0, e.1));
    debug_assert!(out.iter().all(|e| e.0 < n && e.1 < n));
    out
}

fn components(n: usize, edges: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j, _) in edges {
        adj[i].push(j);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        label[s] = next;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if label[u] == usize::MAX {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Eigenvectors 1..=dim of the normalized Laplacian of a connected weighted graph.
fn spectral(nodes: &[usize], edges: &[(usize, usize, f64)], dim: usize) -> Option<Vec<Vec<f64>>> {
    let m = nodes.len();
    if m <= dim + 1 {
        return None;
    }
    let mut local = vec![usize::MAX; nodes.iter().max().map_or(0, |x| x + 1)];
    for (p, &v) in nodes.iter().enumerate() {
        local[v] = p;
    }
    let mut w = DMatrix::<f64>::zeros(m, m);
    for &(i, j, x) in edges {
        if i < local.len() && j < local.len() && local[i] != usize::MAX && local[j] != usize::MAX {
            w[(local[i], local[j])] = x;
        }
    }
    let deg: Vec<f64> = (0..m).map(|i| w.row(i).sum()).collect();
    let mut lap = DMatrix::<f64>::identity(m, m);
    for i in 0..m {
        for j in 0..m {
            if w[(i, j)] != 0.0 {
                lap[(i, j)] -= w[(i, j)] / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    let eig = SymmetricEigen::try_new(lap, 1e-12, 10_000)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let coords: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            order[1..=dim]
                .iter()
                .map(|&c| eig.eigenvectors[(i, c)])
                .collect()
        })
        .collect();
    coords
        .iter()
        .flatten()
        .all(|x| x.is_finite())
        .then_some(coords)
}

fn normalize_sign(coords: &mut [Vec<f64>]) {
    // eigenvector sign is arbitrary; fix it so the largest entry is positive
    let dim = coords.first().map_or(0, Vec::len);
    for c in 0..dim {
        let big = coords
            .iter()
            .map(|r| r[c])
            .fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            coords.iter_mut().for_each(|r| r[c] = -r[c]);
        }
    }
}

/// Spectral layout, laid out per connected component around well-separated anchors.
fn initial_layout(
    n: usize,
    edges: &[(usize, usize, f64)],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let label = components(n, edges);
    let n_comp = label.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_comp];
    for (v, &c) in label.iter().enumerate() {
        members[c].push(v);
    }

    if n_comp == 1 {
        return match spectral(&members[0], edges, dim) {
            Some(mut c) => {
                normalize_sign(&mut c);
                c
            }
            None => {
                log::warn!("spectral initialization failed; using random initialization");
                (0..n)
                    .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
                    .collect()
            }
        };
    }

    let anchors: Vec<Vec<f64>> = if n_comp <= 2 * dim {
        (0..n_comp)
            .map(|c| {
                let mut a = vec![0.0; dim];
                a[(c / 2) % dim] = if c % 2 == 0 { 1.0 } else { -1.0 };
                a
            })
            .collect()
    } else {
        (0..n_comp)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let mut out = vec![vec![0.0; dim]; n];
    for (c, nodes) in members.iter().enumerate() {
        let range = anchors
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != c)
            .map(|(_, a)| {
                a.iter()
                    .zip(&anchors[c])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        let local = (nodes.len() > 2 * dim)
            .then(|| spectral(nodes, edges, dim))
            .flatten();
        let local: Vec<Vec<f64>> = match local {
            Some(mut l) => {
                normalize_sign(&mut l);
                let scale = l.iter().flatten().fold(0.0, |m: f64, x| m.max(x.abs()));
                let f = if scale > 0.0 { range / scale } else { 0.0 };
                l.into_iter()
                    .map(|r| r.into_iter().map(|x| x * f).collect())
                    .collect()
            }
            None => nodes
                .iter()
                .map(|_| {
                    (0..dim)
                        .map(|_| rng.random_range(-range..range))
                        .collect::<Vec<_>>()
                })
                .collect(),
        };
        for (p, &v) in nodes.iter().enumerate() {
            out[v] = local[p]
                .iter()
                .zip(&anchors[c])
                .map(|(x, a)| x + a)
                .collect();
        }
    }
    out
}

/// Projects rows of `x` to `params.n_components` dimensions. Single-threaded SGD,
/// so the output is a deterministic function of the input and the seed.
pub fn umap_fit(x: &EmbeddingMatrix, params: &ReduceParams) -> Result<EmbeddingMatrix> {
    let (n, d) = x.data.dim();
    params.validate(n, d)?;
    x.check_finite()?;
    let dim = params.n_components;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let graph = fuzzy_graph(&x.data, params.n_neighbours);
    let (a, b) = fit_ab(params.min_dist, params.spread);

    // initial layout: scaled to a radius of 10, jittered, then min-max scaled to [0, 10]
    let init = initial_layout(n, &graph, dim, &mut rng);
    let expansion = {
        let m = init.iter().flatten().fold(0.0, |m: f64, x| m.max(x.abs()));
        if m > 0.0 {
            10.0 / m
        } else {
            1.0
        }
    };
    let noise = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut emb = vec![0.0; n * dim];
    for (i, row) in init.iter().enumerate() {
        for c in 0..dim {
            emb[i * dim + c] = row[c] * expansion + noise.sample(&mut rng);
        }
    }
    for c in 0..dim {
        let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(emb[i * dim + c]), hi.max(emb[i * dim + c]))
        });
        let span = hi - lo;
        for i in 0..n {
            emb[i * dim + c] = if span > 0.0 {
                10.0 * (emb[i * dim + c] - lo) / span
            } else {
                5.0
            };
        }
    }

    optimize_layout(&mut emb, dim, n, &graph, a, b, params, &mut rng);

    let data = Array2::from_shape_vec((n, dim), emb).expect("shape matches");
    EmbeddingMatrix::new(Provenance::Reduced, x.ids.clone(), data)
}

#[allow(clippy::too_many_arguments)]
fn optimize_layout(
    emb: &mut [f64],
    dim: usize,
    n: usize,
    graph: &[(usize, usize, f64)],
    a: f64,
    b: f64,
    params: &ReduceParams,
    rng: &mut ChaCha8Rng,
) {
    let n_epochs = params.n_epochs;
    let w_max = graph.iter().map(|e| e.2).fold(0.0, f64::max);
    let edges: Vec<(usize, usize, f64)> = graph
        .iter()
        .filter(|e| e.2 >= w_max / n_epochs as f64)
        .map(|&(i, j, w)| (i, j, w_max / w))
        .collect();
    let neg_rate = params.negative_sample_rate as f64;
    let mut next_sample: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let mut next_neg: Vec<f64> = edges.iter().map(|e| e.2 / neg_rate.max(1.0)).collect();
    let mut grad = vec![0.0; dim];

    for epoch in 0..n_epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
        let t = epoch as f64;
        for (e, &(j, k, eps)) in edges.iter().enumerate() {
            if next_sample[e] > t {
                continue;
            }
            let d2 = dist2(emb, dim, j, k);
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for c in 0..dim {
                grad[c] =
                    (coeff * (emb[j * dim + c] - emb[k * dim + c])).clamp(-GRAD_CLIP, GRAD_CLIP);
            }
            for c in 0..dim {
                emb[j * dim + c] += grad[c] * alpha;
                emb[k * dim + c] -= grad[c] * alpha;
            }
            next_sample[e] += eps;

            if params.negative_sample_rate == 0 {
                continue;
            }
            let eps_neg = eps / neg_rate;
            let n_neg = ((t - next_neg[e]) / eps_neg).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == j {
                    continue;
                }
                let d2 = dist2(emb, dim, j, other);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for c in 0..dim {
                    let g = if coeff > 0.0 {
                        (coeff * (emb[j * dim + c] - emb[other * dim + c]))
                            .clamp(-GRAD_CLIP, GRAD_CLIP)
                    } else {
                        GRAD_CLIP
                    };
                    emb[j * dim + c] += g * alpha;
                }
            }
            next_neg[e] += n_neg as f64 * eps_neg;
        }
    }
}

fn dist2(emb: &[f64], dim: usize, i: usize, j: usize) -> f64 {
    (0..dim)
        .map(|c| (emb[i * dim + c] - emb[j * dim + c]).powi(2))
        .sum()
}

fn pairwise_sq(x: &Array2<f64>) -> Vec<Vec<f64>> {
    let n = x.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            (0..n)
                .map(|j| {
                    xi.iter()
                        .zip(x.row(j).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn neighbour_order(dist: &[f64], i: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    idx
}

/// How well `y` keeps the `k`-neighbourhoods of `x`: 1 minus a normalized penalty on
/// points that are among a row's `k` nearest in `y` but not in `x`, weighted by their
/// rank in `x`. Requires `1 <= k` and `3k < 2n - 1`.
pub fn trustworthiness(x: &Array2<f64>, y: &Array2<f64>, k: usize) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} rows",
            n,
            y.nrows()
        )));
    }
    if k == 0 || k >= n || 2 * n <= 3 * k + 1 {
        return Err(Error::out_of_range(
            "k",
            k,
            format!("1..{}", (2 * n).saturating_sub(1) / 3),
        ));
    }
    let dx = pairwise_sq(x);
    let dy = pairwise_sq(y);
    let penalty: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rank = vec![0usize; n];
            for (r, j) in neighbour_order(&dx[i], i).into_iter().enumerate() {
                rank[j] = r + 1;
            }
            neighbour_order(&dy[i], i)[..k]
                .iter()
                .map(|&j| rank[j].saturating_sub(k) as f64)
                .sum::<f64>()
        })
        .sum();
    let (nf, kf) = (n as f64, k as f64);
    Ok(1.0 - penalty * 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)))
}
