//! Latent semantic analysis: TF-IDF term-document matrix, randomized truncated SVD,
//! LSA word vectors and mean-LSA document embeddings.
//!
//! Mean-LSA embeds a document as the average of the LSA word vectors (rows of
//! `U_d S_d`) of its tokens, so every document gets its own vector regardless of length.

use log::warn;
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenizedCorpus, Vocabulary};
use crate::embedding::{EmbeddingMatrix, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdfVariant {
    /// `ln(n / df)`
    #[default]
    Plain,
    /// `ln((1 + n) / (1 + df)) + 1`
    Smoothed,
}

impl IdfVariant {
    pub fn idf(self, n_docs: usize, df: usize) -> f64 {
        let n = n_docs as f64;
        let df = df as f64;
        match self {
            IdfVariant::Plain => (n / df).ln(),
            IdfVariant::Smoothed => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Counts,
    TfIdf(IdfVariant),
}

/// Sparse `v x n` matrix stored by column (one column per document).
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    n_terms: usize,
    n_docs: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    weighting: Weighting,
}

impl TermDocMatrix {
    /// Raw counts: entry `(t, j)` is the number of occurrences of term `t` in document `j`.
    pub fn from_tokens(corpus: &TokenizedCorpus, vocab: &Vocabulary) -> Self {
        let mut col_ptr = Vec::with_capacity(corpus.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for doc in &corpus.docs {
            let mut ids = vocab.encode(doc);
            ids.sort_unstable();
            for chunk in ids.chunk_by(|a, b| a == b) {
                row_idx.push(chunk[0]);
                values.push(chunk.len() as f64);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n_terms: vocab.len(),
            n_docs: corpus.len(),
            col_ptr,
            row_idx,
            values,
            weighting: Weighting::Counts,
        }
    }

    /// Builds a count matrix from dense rows (terms) by columns (documents).
    pub fn from_dense(dense: &Array2<f64>) -> Self {
        let (v, n) = dense.dim();
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for t in 0..v {
                let x = dense[[t, j]];
                if x != 0.0 {
                    row_idx.push(t);
                    values.push(x);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n_terms: v,
            n_docs: n,
            col_ptr,
            row_idx,
            values,
            weighting: Weighting::Counts,
        }
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.column(j)
            .find(|&(r, _)| r == t)
            .map_or(0.0, |(_, x)| x)
    }

    /// Documents with no in-vocabulary tokens.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n_docs)
            .filter(|&j| self.col_ptr[j] == self.col_ptr[j + 1])
            .collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_terms, self.n_docs));
        for j in 0..self.n_docs {
            for (t, x) in self.column(j) {
                out[[t, j]] = x;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Reweights raw counts by inverse document frequency. Entries whose weight
    /// becomes exactly zero are dropped from storage.
    pub fn tfidf(&self, variant: IdfVariant) -> Result<Self> {
        if self.weighting != Weighting::Counts {
            return Err(Error::AlreadyWeighted);
        }
        let mut df = vec![0usize; self.n_terms];
        for &t in &self.row_idx {
            df[t] += 1;
        }
        let idf: Vec<f64> = df
            .iter()
            .map(|&d| {
                if d == 0 {
                    0.0
                } else {
                    variant.idf(self.n_docs, d)
                }
            })
            .collect();

        let mut col_ptr = vec![0];
        let mut row_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for j in 0..self.n_docs {
            for (t, x) in self.column(j) {
                let w = x * idf[t];
                if w != 0.0 {
                    row_idx.push(t);
                    values.push(w);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            n_terms: self.n_terms,
            n_docs: self.n_docs,
            col_ptr,
            row_idx,
            values,
            weighting: Weighting::TfIdf(variant),
        })
    }

    /// `X * m` for dense `m` with `n_docs` rows.
    fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_terms, m.ncols());
        for c in 0..m.ncols() {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for j in 0..self.n_docs {
                let s = src[j];
                if s == 0.0 {
                    continue;
                }
                for (t, x) in self.column(j) {
                    dst[t] += x * s;
                }
            }
        }
        out
    }

    /// `X^T * m` for dense `m` with `n_terms` rows.
    fn tr_mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_docs, m.ncols());
        for c in 0..m.ncols() {
            let src = m.column(c);
            for j in 0..self.n_docs {
                out[(j, c)] = self.column(j).map(|(t, x)| x * src[t]).sum();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvdParams {
    pub oversample: usize,
    /// Minimum number of power (subspace) iterations.
    pub power_iters: usize,
    /// Extra subspace iterations allowed while the top singular values keep moving.
    pub max_extra_iters: usize,
    pub tol: f64,
}

impl Default for SvdParams {
    fn default() -> Self {
        Self {
            oversample: 10,
            power_iters: 4,
            max_extra_iters: 300,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `v x d`, orthonormal columns.
    pub u: Array2<f64>,
    /// Descending, nonnegative.
    pub s: Vec<f64>,
    /// `n x d`, orthonormal columns.
    pub v: Array2<f64>,
}

impl SvdFactors {
    pub fn dim(&self) -> usize {
        self.s.len()
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn top_singular_estimates(q: &DMatrix<f64>, x: &TermDocMatrix, d: usize) -> Vec<f64> {
    // singular values of Q^T X from the eigenvalues of (Q^T X)(Q^T X)^T
    let bt = x.tr_mul_dense(q);
    let gram = bt.transpose() * &bt;
    let mut ev: Vec<f64> = gram
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.truncate(d);
    ev
}

/// Randomized truncated SVD (Gaussian sketch, oversampling, subspace iteration).
///
/// Runs at least `params.power_iters` subspace iterations, then keeps iterating
/// until the top-`d` singular value estimates change by less than `params.tol`
/// relative, bounded by `params.max_extra_iters`.
pub fn truncated_svd(
    x: &TermDocMatrix,
    d: usize,
    seed: u64,
    params: &SvdParams,
) -> Result<SvdFactors> {
    let k = x.n_terms.min(x.n_docs);
    if d == 0 || d > k {
        return Err(Error::out_of_range("d", d, format!("1..={k}")));
    }
    if x.values.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let l = (d + params.oversample).min(k);

    let omega = gaussian(x.n_docs, l, seed);
    let mut q = orthonormalize(x.mul_dense(&omega));
    if l < k {
        let mut prev: Option<Vec<f64>> = None;
        for it in 0..params.power_iters + params.max_extra_iters {
            let z = orthonormalize(x.tr_mul_dense(&q));
            q = orthonormalize(x.mul_dense(&z));
            if it + 1 < params.power_iters {
                continue;
            }
            let est = top_singular_estimates(&q, x, d);
            if let Some(p) = &prev {
                let moved = est
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b).abs() / a.max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                if moved < params.tol {
                    break;
                }
            }
            prev = Some(est);
        }
    }

    // B = Q^T X, stored transposed (n x l) to reuse the sparse kernel
    let b = x.tr_mul_dense(&q).transpose();
    let svd = b.svd(true, true);
    let (ub, vtb) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let u_full = &q * &ub;
    let mut u = Array2::zeros((x.n_terms, d));
    let mut v = Array2::zeros((x.n_docs, d));
    let mut s = Vec::with_capacity(d);
    for (c, &src) in order.iter().take(d).enumerate() {
        let ucol = u_full.column(src);
        // sign: largest-magnitude entry of each left vector is positive
        let pivot = (0..ucol.len())
            .max_by(|&a, &b| ucol[a].abs().total_cmp(&ucol[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if ucol[pivot] < 0.0 { -1.0 } else { 1.0 };
        for t in 0..x.n_terms {
            u[[t, c]] = sign * ucol[t];
        }
        for j in 0..x.n_docs {
            v[[j, c]] = sign * vtb[(src, j)];
        }
        s.push(svd.singular_values[src].max(0.0));
    }
    Ok(SvdFactors { u, s, v })
}

fn scale_columns(m: &Array2<f64>, s: &[f64]) -> Array2<f64> {
    let mut out = m.clone();
    for (mut col, &sv) in out.columns_mut().into_iter().zip(s) {
        col *= sv;
    }
    out
}

/// LSA word vectors: rows of `U_d S_d`, one per vocabulary term.
pub fn word_vectors(f: &SvdFactors, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
    if f.u.nrows() != vocab.len() {
        return Err(Error::DimensionMismatch(format!(
            "factors have {} term rows, vocabulary has {}",
            f.u.nrows(),
            vocab.len()
        )));
    }
    EmbeddingMatrix::new(
        Provenance::LsaWord,
        vocab.terms().to_vec(),
        scale_columns(&f.u, &f.s),
    )
}

/// Classic LSA document vectors: rows of `V_d S_d`.
pub fn classic_doc_vectors(f: &SvdFactors, corpus: &Corpus) -> Result<EmbeddingMatrix> {
    if f.v.nrows() != corpus.len() {
        return Err(Error::DimensionMismatch(format!(
            "factors have {} document rows, corpus has {}",
            f.v.nrows(),
            corpus.len()
        )));
    }
    EmbeddingMatrix::for_corpus(Provenance::LsaDoc, corpus, scale_columns(&f.v, &f.s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Every token occurrence contributes once.
    #[default]
    Occurrence,
    /// Every distinct term contributes once.
    Type,
}

/// Mean of the word vectors of each document's in-vocabulary tokens.
///
/// Tokens are counted per term and summed in term-id order, so the result does not
/// depend on token order. Documents without in-vocabulary tokens get the zero vector.
pub fn mean_lsa(
    corpus: &Corpus,
    tokens: &TokenizedCorpus,
    vocab: &Vocabulary,
    words: &EmbeddingMatrix,
    pooling: Pooling,
) -> Result<EmbeddingMatrix> {
    if words.nrows() != vocab.len() {
        return Err(Error::DimensionMismatch(format!(
            "word table has {} rows, vocabulary has {}",
            words.nrows(),
            vocab.len()
        )));
    }
    if tokens.len() != corpus.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} tokenized documents for a corpus of {}",
            tokens.len(),
            corpus.len()
        )));
    }
    let dim = words.ncols();
    let rows: Vec<Vec<f64>> = tokens
        .docs
        .par_iter()
        .map(|doc| {
            let mut ids = vocab.encode(doc);
            ids.sort_unstable();
            let mut acc = vec![0.0; dim];
            let mut total = 0.0;
            for chunk in ids.chunk_by(|a, b| a == b) {
                let weight = match pooling {
                    Pooling::Occurrence => chunk.len() as f64,
                    Pooling::Type => 1.0,
                };
                for (a, w) in acc.iter_mut().zip(words.row(chunk[0])) {
                    *a += weight * w;
                }
                total += weight;
            }
            if total > 0.0 {
                for a in &mut acc {
                    *a /= total;
                }
            }
            acc
        })
        .collect();

    for (j, doc) in tokens.docs.iter().enumerate() {
        if vocab.encode(doc).is_empty() {
            warn!(
                "{} has no in-vocabulary tokens; using the zero vector",
                corpus.documents()[j].id
            );
        }
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((corpus.len(), dim), flat).expect("row lengths agree");
    EmbeddingMatrix::for_corpus(Provenance::MeanLsa, corpus, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsaConfig {
    pub dim: usize,
    pub min_df: usize,
    pub idf: IdfVariant,
    pub pooling: Pooling,
    pub svd: SvdParams,
}

impl Default for LsaConfig {
    fn default() -> Self {
        Self {
            dim: 768,
            min_df: 1,
            idf: IdfVariant::Plain,
            pooling: Pooling::Occurrence,
            svd: SvdParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsaModel {
    pub vocab: Vocabulary,
    pub factors: SvdFactors,
    pub words: EmbeddingMatrix,
    pub documents: EmbeddingMatrix,
}

/// Full mean-LSA path from tokenized text. `dim` is clamped to the matrix rank bound.
pub fn fit_mean_lsa(
    corpus: &Corpus,
    tokens: &TokenizedCorpus,
    cfg: &LsaConfig,
    seed: u64,
) -> Result<LsaModel> {
    let vocab = Vocabulary::build(tokens, cfg.min_df)?;
    let counts = TermDocMatrix::from_tokens(tokens, &vocab);
    for j in counts.empty_columns() {
        warn!("{} has an empty term column", corpus.documents()[j].id);
    }
    let x = counts.tfidf(cfg.idf)?;
    let bound = x.n_terms().min(x.n_docs());
    let dim = if cfg.dim > bound {
        warn!("embedding dimension {} clamped to {bound}", cfg.dim);
        bound
    } else {
        cfg.dim
    };
    let factors = truncated_svd(&x, dim, seed, &cfg.svd)?;
    let words = word_vectors(&factors, &vocab)?;
    let documents = mean_lsa(corpus, tokens, &vocab, &words, cfg.pooling)?;
    Ok(LsaModel {
        vocab,
        factors,
        words,
        documents,
    })
}
