mod common;

use ndarray::Array2;
use rand::seq::SliceRandom;
use topicnet::graph::knn_euclidean;
use topicnet::reduce::{trustworthiness, umap_fit, ReduceParams};

fn blob_params(seed: u64) -> ReduceParams {
    ReduceParams {
        n_neighbours: 15,
        n_components: 2,
        seed,
        ..Default::default()
    }
}

#[test]
fn blobs_stay_separated() {
    let (x, labels) = common::blobs(3, 100, 50, 10.0, 1);
    let y = umap_fit(&common::matrix(x.clone()), &blob_params(3)).unwrap();
    assert!(common::knn_purity(&y.data, &labels, 15) >= 0.99);
    // random layout baseline sits far below
    assert!(trustworthiness(&x, &y.data, 10).unwrap() > 0.85);
}

#[test]
fn layout_is_deterministic_per_seed() {
    let (x, _) = common::blobs(3, 30, 20, 10.0, 2);
    let m = common::matrix(x);
    let a = umap_fit(&m, &blob_params(4)).unwrap();
    let b = umap_fit(&m, &blob_params(4)).unwrap();
    let c = umap_fit(&m, &blob_params(5)).unwrap();
    assert_eq!(a.data, b.data);
    assert_ne!(a.data, c.data);
}

#[test]
fn shuffled_layout_scores_near_random() {
    let (x, _) = common::blobs(1, 300, 10, 1.0, 6);
    let mut order: Vec<usize> = (0..300).collect();
    order.shuffle(&mut common::rng(7));
    let y = Array2::from_shape_fn((300, 10), |(i, j)| x[(order[i], j)]);
    assert!(trustworthiness(&x, &y, 10).unwrap() < 0.7);
}

#[test]
fn neighbour_sets_survive_rotation() {
    // a random orthogonal map leaves every kNN index set unchanged
    let (x, _) = common::blobs(2, 40, 6, 5.0, 8);
    let q = {
        let g = common::gaussian_matrix(6, 6, &mut common::rng(9));
        let (qm, _) = gram_schmidt(&g);
        qm
    };
    let rotated = x.dot(&q);
    let sets = |m: &Array2<f64>| -> Vec<Vec<usize>> {
        knn_euclidean(m, 7)
            .into_iter()
            .map(|l| {
                let mut v: Vec<usize> = l.into_iter().map(|p| p.0).collect();
                v.sort_unstable();
                v
            })
            .collect()
    };
    assert_eq!(sets(&x), sets(&rotated));
}

fn gram_schmidt(a: &Array2<f64>) -> (Array2<f64>, ()) {
    let n = a.ncols();
    let mut q = a.clone();
    for j in 0..n {
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let col_k = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-proj, &col_k);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    (q, ())
}

#[test]
fn rejects_bad_shapes() {
    let (x, _) = common::blobs(1, 20, 4, 1.0, 0);
    let m = common::matrix(x);
    assert!(umap_fit(
        &m,
        &ReduceParams {
            n_neighbours: 5,
            n_components: 4,
            ..Default::default()
        }
    )
    .is_err());
    assert!(umap_fit(
        &m,
        &ReduceParams {
            n_neighbours: 20,
            n_components: 2,
            ..Default::default()
        }
    )
    .is_err());
    assert!(umap_fit(
        &m,
        &ReduceParams {
            n_neighbours: 1,
            n_components: 2,
            ..Default::default()
        }
    )
    .is_err());
}
