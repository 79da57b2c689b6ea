//! Acceptance suite. Run with `cargo test -p topicnet --test acceptance`.
//!
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use topicnet::community::{
    leiden, louvain, modularity, Detector, Method, Partition, QualityVariant,
};
use topicnet::corpus::{Corpus, DocumentId, TokenizedCorpus, Tokenizer};
use topicnet::evaluate::{evaluate, match_cluster, ReferenceGrouping};
use topicnet::graph::{knn_cosine, knn_euclidean, AdjacencyGraph};
use topicnet::lsa::{fit_mean_lsa, mean_lsa, truncated_svd, LsaConfig, SvdParams, TermDocMatrix};
use topicnet::pipeline::{run_pipeline, PipelineConfig};
use topicnet::reduce::{trustworthiness, umap_fit, ReduceParams};
use topicnet::significance::{test_structure, NullModel};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn graph(n: usize, edges: &[(usize, usize)]) -> AdjacencyGraph {
    AdjacencyGraph::from_edges(n, edges.iter().copied()).unwrap()
}

fn modularity_oracle() -> Outcome {
    let mut r = common::rng(1);
    let mut worst_def = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut graphs = 0;
    for n in 3..=7 {
        for _ in 0..12 {
            let p = r.random_range(0.25..0.8);
            let edges = common::random_connected(n, p, &mut r);
            let g = graph(n, &edges);
            common::for_each_partition(n, |a| {
                let ours = modularity(&g, a, QualityVariant::Newman).unwrap();
                worst_def =
                    worst_def.max((ours - common::modularity_by_definition(n, &edges, a)).abs());
            });
            let best = common::brute_force_optimum(n, &edges);
            for seed in 0..3 {
                for q in [
                    louvain(&g, QualityVariant::Newman, seed).unwrap().quality,
                    leiden(&g, QualityVariant::Newman, seed).unwrap().quality,
                ] {
                    worst_gap = worst_gap.max(best - q);
                }
            }
            graphs += 1;
        }
    }
    check(
        graphs >= 50 && worst_def <= 1e-12 && worst_gap <= 0.01,
        format!("{graphs} graphs, max |Q - Q_def| = {worst_def:.1e}, max gap to optimum = {worst_gap:.4}"),
    )
}

fn closed_forms() -> Outcome {
    let mut k4 = Vec::new();
    for base in [0, 4] {
        for a in 0..4 {
            for b in a + 1..4 {
                k4.push((base + a, base + b));
            }
        }
    }
    let bridge = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)];
    let k4 = graph(8, &k4);
    let bridge = graph(6, &bridge);
    let trivial = modularity(&bridge, &[0; 6], QualityVariant::Newman).unwrap();
    let mut worst = trivial.abs();
    for seed in 0..5 {
        for (g, want) in [(&k4, 0.5), (&bridge, 5.0 / 14.0)] {
            for p in [
                louvain(g, QualityVariant::Newman, seed).unwrap(),
                leiden(g, QualityVariant::Newman, seed).unwrap(),
            ] {
                worst = worst.max((p.quality - want).abs());
                if p.n_communities() != 2 {
                    return Err(format!(
                        "{} found {} communities",
                        p.method,
                        p.n_communities()
                    ));
                }
            }
        }
    }
    check(
        worst < 1e-12,
        format!("single community Q = {trivial}, max deviation {worst:.1e}"),
    )
}

fn leiden_connectivity() -> Outcome {
    let bad: Vec<u64> = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let g = common::random_knn_graph(200, 10, 4, seed);
            let p = leiden(&g, QualityVariant::Dugue, seed).unwrap();
            !p.communities().iter().all(|c| g.is_connected_subset(c))
        })
        .collect();
    check(
        bad.is_empty(),
        format!(
            "100 graphs, {} with a disconnected community {bad:?}",
            bad.len()
        ),
    )
}

fn significance_calibration() -> Outcome {
    let det = Detector::new(Method::Leiden, QualityVariant::Newman);
    let planted: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let g = common::planted(120, 4, 0.5, 0.01, 1000 + seed);
            test_structure(&g, &det, 500, seed, NullModel::Shuffle)
                .unwrap()
                .p
        })
        .collect();
    let er: Vec<bool> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let g = common::erdos_renyi(60, 0.1, 2000 + seed);
            test_structure(&g, &det, 500, seed, NullModel::Shuffle)
                .unwrap()
                .significant
        })
        .collect();
    let planted_hits = planted.iter().filter(|&&p| p <= 0.01).count();
    let er_hits = er.iter().filter(|&&s| s).count();
    check(
        planted_hits * 100 >= 95 * 50 && er_hits * 100 <= 10 * 50,
        format!("planted p <= 0.01 in {planted_hits}/50, G(60, 0.1) significant in {er_hits}/50"),
    )
}

fn svd_fidelity() -> Outcome {
    let mut r = common::rng(11);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let rows = r.random_range(5..=200);
        let cols = r.random_range(5..=100);
        let a = common::gaussian_matrix(rows, cols, &mut r);
        let d = r.random_range(1..=rows.min(cols).min(20));
        let f = truncated_svd(
            &TermDocMatrix::from_dense(&a),
            d,
            case,
            &SvdParams::default(),
        )
        .map_err(|e| e.to_string())?;
        let oracle = common::jacobi_singular_values(&a);
        for (s, o) in f.s.iter().zip(&oracle) {
            worst = worst.max((s - o).abs() / o);
        }
    }
    let x: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..25).map(|_| r.random_range(-1.0..1.0)).collect();
    let a = Array2::from_shape_fn((40, 25), |(i, j)| x[i] * y[j]);
    let f = truncated_svd(&TermDocMatrix::from_dense(&a), 1, 0, &SvdParams::default()).unwrap();
    let recon = (0..40)
        .flat_map(|i| (0..25).map(move |j| (i, j)))
        .map(|(i, j)| (f.u[(i, 0)] * f.s[0] * f.v[(j, 0)] - a[(i, j)]).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-6 && recon <= 1e-8,
        format!("max relative error {worst:.1e} over 50 matrices, rank-1 residual {recon:.1e}"),
    )
}

fn mean_lsa_pooling() -> Outcome {
    let (jsonl, _) = common::synthetic_corpus(4, 25, 30, 6);
    let corpus = Corpus::parse_jsonl(&jsonl).unwrap();
    let tokens = corpus.tokenize(&Tokenizer::lsa());
    let cfg = LsaConfig {
        dim: 20,
        ..Default::default()
    };
    let model = fit_mean_lsa(&corpus, &tokens, &cfg, 3).unwrap();

    // one single-token document per vocabulary term
    let singles = TokenizedCorpus::new(
        tokens.mode,
        model
            .vocab
            .terms()
            .iter()
            .map(|t| vec![t.clone()])
            .collect(),
    );
    let single_corpus = Corpus::parse_jsonl(
        &(0..singles.len())
            .map(|i| format!("{{\"book\": 1, \"hymn\": {}, \"text\": \"x\"}}\n", i + 1))
            .collect::<String>(),
    )
    .unwrap();
    let pooled = mean_lsa(
        &single_corpus,
        &singles,
        &model.vocab,
        &model.words,
        cfg.pooling,
    )
    .unwrap();
    if pooled.data != model.words.data {
        return Err("single-token embedding differs from its word vector".into());
    }

    let mut r = common::rng(8);
    let shuffled = TokenizedCorpus::new(
        tokens.mode,
        tokens
            .docs
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.shuffle(&mut r);
                d
            })
            .collect(),
    );
    let again = mean_lsa(&corpus, &shuffled, &model.vocab, &model.words, cfg.pooling).unwrap();
    check(
        again.data == model.documents.data,
        format!(
            "{} single-token documents exact, {} shuffled documents exact",
            singles.len(),
            corpus.len()
        ),
    )
}

fn reduction_quality() -> Outcome {
    let (x, labels) = common::blobs(3, 100, 50, 10.0, 1);
    let params = ReduceParams {
        n_neighbours: 15,
        n_components: 2,
        seed: 3,
        ..Default::default()
    };
    let a = umap_fit(&common::matrix(x.clone()), &params).unwrap();
    let b = umap_fit(&common::matrix(x.clone()), &params).unwrap();
    let t = trustworthiness(&x, &a.data, 10).unwrap();
    let purity = common::knn_purity(&a.data, &labels, 15);
    check(
        t >= 0.95 && purity >= 0.99 && a.data == b.data,
        format!(
            "trustworthiness(10) = {t:.4}, 15-NN purity = {purity:.4}, deterministic = {}",
            a.data == b.data
        ),
    )
}

fn ranking_equivalence() -> Outcome {
    let mut r = common::rng(4);
    let mut x = common::gaussian_matrix(1000, 16, &mut r);
    for mut row in x.rows_mut() {
        let n = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / n);
    }
    let sets = |lists: Vec<Vec<(usize, f64)>>| -> Vec<Vec<usize>> {
        lists
            .into_iter()
            .map(|l| {
                let mut v: Vec<usize> = l.into_iter().map(|p| p.0).collect();
                v.sort_unstable();
                v
            })
            .collect()
    };
    let mut differing = 0;
    for k in [4, 10] {
        let e = sets(knn_euclidean(&x, k));
        let c = sets(knn_cosine(&x, k));
        differing += e.iter().zip(&c).filter(|(a, b)| a != b).count();
    }
    check(
        differing == 0,
        format!("1000 unit vectors, k in {{4, 10}}, {differing} differing neighbour sets"),
    )
}

/// Five-topic corpus with one reference file per topic.
fn topic_config(dir: &std::path::Path, seed: u64) -> (PipelineConfig, Vec<usize>) {
    let (jsonl, labels) = common::synthetic_corpus(5, 40, 40, seed);
    fs::write(dir.join("corpus.jsonl"), jsonl).unwrap();
    let references = (0..5u32)
        .map(|t| {
            let members = (1..=40)
                .map(|h| DocumentId::new(t + 1, h).unwrap())
                .collect();
            let g = ReferenceGrouping::new(format!("topic {}", t + 1), members).unwrap();
            let path = dir.join(format!("topic{}.json", t + 1));
            fs::write(&path, serde_json::to_string(&g).unwrap()).unwrap();
            path
        })
        .collect();
    let cfg = PipelineConfig {
        corpus: dir.join("corpus.jsonl"),
        output_dir: dir.join("out"),
        seed,
        references,
        ..Default::default()
    };
    (cfg, labels)
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, labels) = topic_config(dir.path(), 0);
    let run = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let purity = common::cluster_purity(&run.partition.assignment, &labels);
    let missing: Vec<usize> = run.evaluation.groupings.iter().map(|g| g.missing).collect();
    check(
        purity >= 0.95 && run.significance.p <= 0.01 && missing.iter().all(|&m| m == 0),
        format!(
            "purity {purity:.3}, {} communities, Q = {:.4}, p = {:.4}, missing per topic {missing:?}",
            run.partition.n_communities(),
            run.partition.quality,
            run.significance.p
        ),
    )
}

fn table_semantics() -> Outcome {
    let mut r = common::rng(10);
    for case in 0..1000 {
        let n = r.random_range(1..60);
        let k = r.random_range(1..=n.min(12));
        let assignment: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(&mut r);
        nodes.truncate(r.random_range(1..=n));
        let s = match_cluster(&assignment, "fuzz", &nodes).map_err(|e| e.to_string())?;
        let size = assignment.iter().filter(|&&c| c == s.cluster).count();
        if s.correct + s.missing != nodes.len() || s.correct + s.non_famous != size {
            return Err(format!("case {case}: {s:?} for {} members", nodes.len()));
        }
    }

    // 9 reference hymns, all in one 31-hymn cluster
    let jsonl: String = (1..=71)
        .map(|h| format!("{{\"book\": 10, \"hymn\": {h}, \"text\": \"w\"}}\n"))
        .collect();
    let corpus = Corpus::parse_jsonl(&jsonl).unwrap();
    let assignment: Vec<usize> = (0..71).map(|i| usize::from(i >= 31)).collect();
    let members: Vec<DocumentId> = (0..9)
        .map(|i| DocumentId::new(10, i * 3 + 1).unwrap())
        .collect();
    let creation = ReferenceGrouping::new("Creation", members).unwrap();
    let partition = Partition {
        assignment,
        quality: 0.0,
        method: Method::Leiden,
        variant: QualityVariant::Dugue,
        seed: 0,
    };
    let report = evaluate(&partition, &corpus, &[creation]).map_err(|e| e.to_string())?;
    let row = &report.groupings[0];
    check(
        (row.correct, row.missing, row.non_famous) == (9, 0, 22),
        format!(
            "1000 fuzzed cases, Creation row {}/{}/{}",
            row.correct, row.missing, row.non_famous
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = topic_config(dir.path(), 7);
    let a = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let b = run_pipeline(&PipelineConfig {
        output_dir: dir.path().join("again"),
        ..cfg
    })
    .map_err(|e| e.to_string())?;
    let same = a.artifacts == b.artifacts;
    check(
        same && !a.artifacts.is_empty(),
        format!("{} artifacts, hashes identical = {same}", a.artifacts.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        (
            "modularity oracle",
            Duration::from_secs(60),
            modularity_oracle,
        ),
        (
            "closed-form modularity",
            Duration::from_secs(10),
            closed_forms,
        ),
        (
            "leiden connectivity",
            Duration::from_secs(120),
            leiden_connectivity,
        ),
        (
            "significance calibration",
            Duration::from_secs(600),
            significance_calibration,
        ),
        ("svd fidelity", Duration::from_secs(60), svd_fidelity),
        (
            "mean-lsa pooling",
            Duration::from_secs(10),
            mean_lsa_pooling,
        ),
        (
            "reduction quality",
            Duration::from_secs(120),
            reduction_quality,
        ),
        (
            "cosine/euclidean ranking",
            Duration::from_secs(10),
            ranking_equivalence,
        ),
        ("end-to-end recovery", Duration::from_secs(300), end_to_end),
        (
            "grouping evaluation",
            Duration::from_secs(10),
            table_semantics,
        ),
        ("determinism", Duration::from_secs(300), determinism),
    ];
    // Optional filters: criterion numbers ("04") or name fragments.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let number = format!("{:02}", i + 1);
        if !filters.is_empty()
            && !filters
                .iter()
                .any(|x| *x == number || name.contains(x.as_str()))
        {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (tag, detail) = match outcome {
            Ok(d) if took <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(d) => ("FAIL", d),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "{tag} {number} {name}: {detail} [{:.1}s]",
            took.as_secs_f64()
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
