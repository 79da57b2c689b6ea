//! Topic networks from document embeddings.
//!
//! The pipeline runs in six stages: embed documents (mean-LSA, PV-DBOW, or imported
//! vectors), reduce them with UMAP, link each document to its nearest neighbours,
//! detect communities, test the detected structure against a permutation null, and
//! score communities against reference groupings.

pub mod community;
pub mod corpus;
pub mod dbow;
pub mod embedding;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod lsa;
pub mod pipeline;
pub mod plot;
pub mod reduce;
pub mod significance;

pub use error::{Error, Result};
