//! Dense per-row embeddings and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * TSV: header `id<TAB>dim0<TAB>...<TAB>dim{d-1}`, one row per document or term,
//!   floats rendered with 9 significant digits.
//! * Binary: magic `EMB1`, `u32` rows, `u32` cols, then little-endian `f32` values in
//!   row-major order. The binary form carries no ids; rows are taken in corpus order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// LSA word table, one row per vocabulary term.
    LsaWord,
    MeanLsa,
    LsaDoc,
    Dbow,
    Imported,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Tsv,
    Binary,
}

impl EmbeddingFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => EmbeddingFormat::Tsv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub provenance: Provenance,
    /// Row labels: document ids or vocabulary terms.
    pub ids: Vec<String>,
    pub data: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(provenance: Provenance, ids: Vec<String>, data: Array2<f64>) -> Result<Self> {
        if ids.len() != data.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                data.nrows()
            )));
        }
        let m = Self {
            provenance,
            ids,
            data,
        };
        m.check_finite()?;
        Ok(m)
    }

    pub fn for_corpus(provenance: Provenance, corpus: &Corpus, data: Array2<f64>) -> Result<Self> {
        Self::new(
            provenance,
            corpus.ids().map(|id| id.to_string()).collect(),
            data,
        )
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn check_finite(&self) -> Result<()> {
        for ((row, col), v) in self.data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.nrows() * self.ncols() * 16);
        out.push_str("id");
        for j in 0..self.ncols() {
            write!(out, "\tdim{j}").unwrap();
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(self.data.rows()) {
            out.push_str(id);
            for v in row {
                write!(out, "\t{v:.8e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.data.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(self.ncols() as u32).to_le_bytes());
        for v in self.data.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn export(&self, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
        let path = path.as_ref();
        let bytes = match format {
            EmbeddingFormat::Tsv => self.to_tsv().into_bytes(),
            EmbeddingFormat::Binary => self.to_binary(),
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Rows as parsed from a file, before they are aligned with a corpus.
#[derive(Debug, Clone)]
pub struct RawEmbeddings {
    pub ids: Option<Vec<String>>,
    pub data: Array2<f64>,
}

pub fn parse_tsv(text: &str) -> Result<RawEmbeddings> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.first() != Some(&"id") {
        return Err(Error::Format("header must start with \"id\"".into()));
    }
    let dim = cols.len() - 1;
    if dim == 0 {
        return Err(Error::Format("dimension 0".into()));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        let before = values.len();
        for (col, field) in fields.enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("row {row}, column {col}: cannot parse {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            values.push(v);
        }
        if values.len() - before != dim {
            return Err(Error::Format(format!(
                "row {row} ({id}) has {} values, expected {dim}",
                values.len() - before
            )));
        }
        ids.push(id);
    }
    let data = Array2::from_shape_vec((ids.len(), dim), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(RawEmbeddings {
        ids: Some(ids),
        data,
    })
}

pub fn parse_binary(bytes: &[u8]) -> Result<RawEmbeddings> {
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing EMB1 header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if cols == 0 {
        return Err(Error::Format("dimension 0".into()));
    }
    let body = &bytes[12..];
    if body.len() != rows * cols * 4 {
        return Err(Error::Format(format!(
            "expected {} payload bytes for {rows}x{cols}, found {}",
            rows * cols * 4,
            body.len()
        )));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        values.push(v as f64);
    }
    let data =
        Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Format(e.to_string()))?;
    Ok(RawEmbeddings { ids: None, data })
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawEmbeddings> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        parse_tsv(&text)
    }
}

/// Aligns parsed rows with the corpus: rows are reordered into corpus order and the
/// id set must match the corpus exactly.
pub fn align_to_corpus(
    raw: RawEmbeddings,
    corpus: &Corpus,
    provenance: Provenance,
) -> Result<EmbeddingMatrix> {
    let n = corpus.len();
    let Some(ids) = raw.ids else {
        if raw.data.nrows() != n {
            return Err(Error::Coverage(format!(
                "binary file has {} rows, corpus has {n} documents",
                raw.data.nrows()
            )));
        }
        return EmbeddingMatrix::for_corpus(provenance, corpus, raw.data);
    };

    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(ids.len());
    for (row, id) in ids.iter().enumerate() {
        if by_id.insert(id.as_str(), row).is_some() {
            return Err(Error::Coverage(format!("duplicate id {id}")));
        }
    }
    let labels: Vec<String> = corpus.ids().map(|id| id.to_string()).collect();
    let mut data = Array2::zeros((n, raw.data.ncols()));
    for (pos, label) in labels.iter().enumerate() {
        let row = by_id
            .remove(label.as_str())
            .ok_or_else(|| Error::Coverage(format!("missing id {label}")))?;
        data.row_mut(pos).assign(&raw.data.row(row));
    }
    if let Some(extra) = ids.iter().find(|id| by_id.contains_key(id.as_str())) {
        return Err(Error::Coverage(format!("id {extra} is not in the corpus")));
    }
    EmbeddingMatrix::new(provenance, labels, data)
}

/// Reads externally produced document embeddings (TSV or binary) in corpus order.
pub fn import_embeddings(path: impl AsRef<Path>, corpus: &Corpus) -> Result<EmbeddingMatrix> {
    align_to_corpus(read_raw(path)?, corpus, Provenance::Imported)
}

/// Reads embeddings produced by this crate, keeping the given provenance tag.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    corpus: &Corpus,
    provenance: Provenance,
) -> Result<EmbeddingMatrix> {
    align_to_corpus(read_raw(path)?, corpus, provenance)
}

pub fn export_embeddings(
    m: &EmbeddingMatrix,
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
) -> Result<()> {
    m.export(path, format)
}
