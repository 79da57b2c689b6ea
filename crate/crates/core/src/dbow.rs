//! Paragraph vectors, distributed bag of words (PV-DBOW), with negative sampling.
//!
//! Each document vector is trained to predict the words of its document against
//! noise words drawn from the unigram distribution raised to 0.75. Word vectors are
//! output-side parameters only and are not exported.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PreprocessMode, TokenizedCorpus, Vocabulary};
use crate::embedding::{EmbeddingMatrix, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbowParams {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub noise_exponent: f64,
    pub seed: u64,
}

impl Default for DbowParams {
    fn default() -> Self {
        Self {
            dim: 768,
            epochs: 200,
            negatives: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            noise_exponent: 0.75,
            seed: 0,
        }
    }
}

impl DbowParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::out_of_range("dim", 0, ">= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::out_of_range("epochs", 0, ">= 1"));
        }
        if self.negatives == 0 {
            return Err(Error::out_of_range("negatives", 0, ">= 1"));
        }
        if !(self.initial_lr > 0.0 && self.min_lr >= 0.0 && self.min_lr <= self.initial_lr) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must decay from a positive initial_lr ({}) to min_lr ({})",
                self.initial_lr, self.min_lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DbowOutput {
    pub embeddings: EmbeddingMatrix,
    /// Mean negative-sampling loss per (document, word) pair, one entry per epoch.
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln sigmoid(x)`, computed without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains PV-DBOW document vectors. Single-threaded, so a fixed seed gives
/// bit-identical output.
pub fn train_dbow(
    corpus: &Corpus,
    tokens: &TokenizedCorpus,
    vocab: &Vocabulary,
    params: &DbowParams,
) -> Result<DbowOutput> {
    params.validate()?;
    if corpus.is_empty() || tokens.is_empty() {
        return Err(Error::InvalidParameter("document set is empty".into()));
    }
    if tokens.len() != corpus.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} token streams for {} documents",
            tokens.len(),
            corpus.len()
        )));
    }
    if vocab.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "negative sampling needs at least 2 terms, vocabulary has {}",
            vocab.len()
        )));
    }
    if tokens.mode != PreprocessMode::Doc2VecLight {
        log::warn!("PV-DBOW input was tokenized with {:?}", tokens.mode);
    }

    let docs: Vec<Vec<usize>> = tokens.docs.iter().map(|d| vocab.encode(d)).collect();
    let untrained = docs.iter().filter(|d| d.is_empty()).count();
    if untrained > 0 {
        log::warn!(
            "{untrained} documents have no in-vocabulary tokens and keep their initial vectors"
        );
    }

    let mut counts = vec![0.0f64; vocab.len()];
    for &w in docs.iter().flatten() {
        counts[w] += 1.0;
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(params.noise_exponent)))
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;

    let (n, dim) = (docs.len(), params.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut doc_vecs: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut word_vecs = vec![0.0; vocab.len() * dim];
    let mut neu = vec![0.0; dim];

    let pairs_per_epoch: usize = docs.iter().map(Vec::len).sum();
    let total = (pairs_per_epoch * params.epochs).max(1) as f64;
    let mut done = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_loss = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &d in &order {
            for &target in &docs[d] {
                let lr =
                    params.initial_lr - (params.initial_lr - params.min_lr) * (done as f64 / total);
                done += 1;
                neu.iter_mut().for_each(|v| *v = 0.0);
                let dv = &mut doc_vecs[d * dim..(d + 1) * dim];
                for s in 0..=params.negatives {
                    let (w, label) = if s == 0 {
                        (target, 1.0)
                    } else {
                        let w = noise.sample(&mut rng);
                        if w == target {
                            continue;
                        }
                        (w, 0.0)
                    };
                    let wv = &mut word_vecs[w * dim..(w + 1) * dim];
                    let score = dot(dv, wv);
                    loss += if label == 1.0 {
                        neg_log_sigmoid(score)
                    } else {
                        neg_log_sigmoid(-score)
                    };
                    let g = (label - sigmoid(score)) * lr;
                    for i in 0..dim {
                        neu[i] += g * wv[i];
                        wv[i] += g * dv[i];
                    }
                }
                for i in 0..dim {
                    dv[i] += neu[i];
                }
            }
        }
        epoch_loss.push(loss / pairs_per_epoch.max(1) as f64);
    }

    let data = Array2::from_shape_vec((n, dim), doc_vecs).expect("shape matches");
    Ok(DbowOutput {
        embeddings: EmbeddingMatrix::for_corpus(Provenance::Dbow, corpus, data)?,
        epoch_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokenizer;

    fn corpus(texts: &[String]) -> Corpus {
        let jsonl: String = texts
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{{\"book\":1,\"hymn\":{},\"text\":\"{t}\"}}\n", i + 1))
            .collect();
        Corpus::parse_jsonl(&jsonl).unwrap()
    }

    fn two_groups() -> Vec<String> {
        let a = ["cat", "dog", "mouse", "horse", "cow", "goat"];
        let b = ["ship", "sea", "sail", "wave", "port", "anchor"];
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let mut out = Vec::new();
        for words in [a, b] {
            for _ in 0..10 {
                let doc: Vec<&str> = (0..12)
                    .map(|_| words[r.random_range(0..words.len())])
                    .collect();
                out.push(doc.join(" "));
            }
        }
        out
    }

    fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
        a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
    }

    fn train(texts: &[String], params: &DbowParams) -> DbowOutput {
        let c = corpus(texts);
        let t = c.tokenize(&Tokenizer::doc2vec());
        let v = Vocabulary::build(&t, 1).unwrap();
        train_dbow(&c, &t, &v, params).unwrap()
    }

    #[test]
    fn separates_disjoint_vocabularies() {
        let params = DbowParams {
            dim: 16,
            epochs: 200,
            seed: 1,
            ..Default::default()
        };
        let out = train(&two_groups(), &params);
        let m = &out.embeddings.data;
        let (mut within, mut between, mut nw, mut nb) = (0.0, 0.0, 0, 0);
        for i in 0..20 {
            for j in i + 1..20 {
                let c = cosine(m.row(i), m.row(j));
                if i / 10 == j / 10 {
                    within += c;
                    nw += 1;
                } else {
                    between += c;
                    nb += 1;
                }
            }
        }
        assert!(within / nw as f64 > between / nb as f64);
        assert!(out.epoch_loss.last().unwrap() < &out.epoch_loss[0]);
        assert!(m.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn duplicate_documents_are_close() {
        let mut texts = two_groups();
        texts.push(texts[3].clone());
        let out = train(
            &texts,
            &DbowParams {
                dim: 16,
                epochs: 100,
                seed: 2,
                ..Default::default()
            },
        );
        let m = &out.embeddings.data;
        let mut all: Vec<f64> = (0..m.nrows())
            .flat_map(|i| (i + 1..m.nrows()).map(move |j| (i, j)))
            .map(|(i, j)| cosine(m.row(i), m.row(j)))
            .collect();
        all.sort_by(f64::total_cmp);
        let median = all[all.len() / 2];
        assert!(cosine(m.row(3), m.row(20)) > median);
    }

    #[test]
    fn deterministic_for_seed() {
        let p = DbowParams {
            dim: 8,
            epochs: 5,
            seed: 9,
            ..Default::default()
        };
        let a = train(&two_groups(), &p);
        let b = train(&two_groups(), &p);
        assert_eq!(a.embeddings.data, b.embeddings.data);
        assert_eq!(a.epoch_loss, b.epoch_loss);
        assert_eq!(a.embeddings.provenance, Provenance::Dbow);
    }

    #[test]
    fn rejects_tiny_vocabulary_and_bad_params() {
        let c = corpus(&["om om om".to_string(), "om".to_string()]);
        let t = c.tokenize(&Tokenizer::doc2vec());
        let v = Vocabulary::build(&t, 1).unwrap();
        assert!(train_dbow(&c, &t, &v, &DbowParams::default()).is_err());
        assert!(DbowParams {
            negatives: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DbowParams {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DbowParams {
            dim: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
