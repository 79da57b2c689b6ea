mod common;

use proptest::prelude::*;
use topicnet::community::{
    label_propagation, leiden, louvain, modularity, Detector, Method, QualityVariant,
};
use topicnet::graph::AdjacencyGraph;

fn edges_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (3usize..30).prop_flat_map(|n| {
        let pairs = prop::collection::vec((0..n, 0..n), 1..(3 * n));
        (Just(n), pairs)
    })
}

fn graph(n: usize, pairs: &[(usize, usize)]) -> Option<AdjacencyGraph> {
    let edges: Vec<(usize, usize)> = pairs.iter().filter(|(a, b)| a != b).copied().collect();
    if edges.is_empty() {
        return None;
    }
    Some(AdjacencyGraph::from_edges(n, edges).unwrap())
}

const VARIANTS: [QualityVariant; 3] = [
    QualityVariant::Newman,
    QualityVariant::Dugue,
    QualityVariant::Potts { resolution: 0.1 },
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn newman_modularity_is_bounded_and_label_free((n, pairs) in edges_strategy(), labels in prop::collection::vec(0usize..5, 30)) {
        let Some(g) = graph(n, &pairs) else { return Ok(()) };
        let a = &labels[..n];
        let q = modularity(&g, a, QualityVariant::Newman).unwrap();
        prop_assert!((-0.5 - 1e-12..=1.0).contains(&q));
        let renamed: Vec<usize> = a.iter().map(|&c| 4 - c).collect();
        prop_assert!((modularity(&g, &renamed, QualityVariant::Newman).unwrap() - q).abs() < 1e-12);
        prop_assert!(modularity(&g, &vec![0; n], QualityVariant::Newman).unwrap().abs() < 1e-12);
    }

    #[test]
    fn detectors_return_valid_partitions((n, pairs) in edges_strategy(), seed in 0u64..1000) {
        let Some(g) = graph(n, &pairs) else { return Ok(()) };
        for v in VARIANTS {
            for method in [Method::Louvain, Method::Leiden] {
                let p = Detector::new(method, v).detect(&g, seed).unwrap();
                prop_assert_eq!(p.assignment.len(), n);
                // contiguous labels in order of first appearance
                let mut next = 0;
                for &c in &p.assignment {
                    prop_assert!(c <= next);
                    if c == next {
                        next += 1;
                    }
                }
                prop_assert!((p.quality - modularity(&g, &p.assignment, v).unwrap()).abs() < 1e-12);
                prop_assert!(p.quality >= modularity(&g, &(0..n).collect::<Vec<_>>(), v).unwrap() - 1e-12);
            }
        }
    }

    #[test]
    fn leiden_communities_are_connected((n, pairs) in edges_strategy(), seed in 0u64..1000) {
        let Some(g) = graph(n, &pairs) else { return Ok(()) };
        for v in VARIANTS {
            let p = leiden(&g, v, seed).unwrap();
            for c in p.communities() {
                prop_assert!(g.is_connected_subset(&c));
            }
        }
    }
}

#[test]
fn matches_brute_force_on_small_graphs() {
    let mut r = common::rng(21);
    for n in 4..=7 {
        for _ in 0..6 {
            let edges = common::random_connected(n, 0.45, &mut r);
            let g = AdjacencyGraph::from_edges(n, edges.clone()).unwrap();
            let best = common::brute_force_optimum(n, &edges);
            for seed in 0..4 {
                assert!(best - louvain(&g, QualityVariant::Newman, seed).unwrap().quality <= 0.01);
                assert!(best - leiden(&g, QualityVariant::Newman, seed).unwrap().quality <= 0.01);
            }
        }
    }
}

#[test]
fn planted_blocks_recovered() {
    let g = common::planted(120, 4, 0.5, 0.01, 3);
    let truth: Vec<usize> = (0..120).map(|i| i / 30).collect();
    for method in [Method::Louvain, Method::Leiden] {
        let p = Detector::new(method, QualityVariant::Newman)
            .detect(&g, 1)
            .unwrap();
        assert_eq!(p.n_communities(), 4, "{method}");
        assert_eq!(common::cluster_purity(&p.assignment, &truth), 1.0);
    }
    let lpa = label_propagation(&g, 1).unwrap();
    assert!(common::cluster_purity(&lpa.assignment, &truth) >= 0.95);
}

#[test]
fn same_seed_same_partition() {
    let g = common::random_knn_graph(150, 8, 4, 5);
    for method in [Method::Louvain, Method::Leiden, Method::LabelPropagation] {
        let d = Detector::new(method, QualityVariant::Dugue);
        assert_eq!(d.detect(&g, 9).unwrap(), d.detect(&g, 9).unwrap());
    }
}

#[test]
fn start_count_is_validated_and_monotone() {
    let g = common::random_knn_graph(120, 6, 4, 8);
    for method in [Method::Louvain, Method::Leiden] {
        let d = Detector::new(method, QualityVariant::Newman);
        assert!(d.with_starts(0).detect(&g, 1).is_err());
        // more starts from the same seed extend the same sequence, so Q never drops
        let one = d.with_starts(1).detect(&g, 1).unwrap().quality;
        let many = d.with_starts(6).detect(&g, 1).unwrap().quality;
        assert!(many >= one, "{method}: {many} < {one}");
    }
}
