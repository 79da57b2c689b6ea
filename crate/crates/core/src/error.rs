use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    MalformedRecord { line: usize, msg: String },

    #[error("duplicate document id {0}")]
    DuplicateId(String),

    #[error("document {0} has empty text")]
    EmptyText(String),

    #[error("invalid document id {0:?}")]
    InvalidId(String),

    #[error("vocabulary is empty after filtering (min_df = {min_df})")]
    EmptyVocabulary { min_df: usize },

    #[error("term-document matrix is already TF-IDF weighted")]
    AlreadyWeighted,

    #[error("{what} = {value} out of range ({expected})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        expected: String,
    },

    #[error("matrix is all zero")]
    ZeroMatrix,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("embedding ids do not cover the corpus: {0}")]
    Coverage(String),

    #[error("invalid embedding file: {0}")]
    Format(String),

    #[error("graph has no edges")]
    NoEdges,

    #[error("partition does not cover the graph: {0}")]
    PartitionMismatch(String),

    #[error("reference grouping {0:?} has no members")]
    EmptyReference(String),

    #[error("reference grouping {name:?} names ids missing from the corpus: {missing:?}")]
    UnresolvedReference { name: String, missing: Vec<String> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn out_of_range(
        what: &'static str,
        value: usize,
        expected: impl Into<String>,
    ) -> Self {
        Error::OutOfRange {
            what,
            value,
            expected: expected.into(),
        }
    }
}
