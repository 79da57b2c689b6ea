//! Scoring a partition against curated reference groupings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::corpus::{Corpus, DocumentId};
use crate::error::{Error, Result};

/// A named set of documents, read from `{"name": "...", "members": ["RV 10.129", ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceGrouping {
    pub name: String,
    pub members: Vec<DocumentId>,
}

impl ReferenceGrouping {
    pub fn new(name: impl Into<String>, members: Vec<DocumentId>) -> Result<Self> {
        let name = name.into();
        if members.is_empty() {
            return Err(Error::EmptyReference(name));
        }
        Ok(Self { name, members })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let g: ReferenceGrouping = serde_json::from_str(text)?;
        Self::new(g.name, g.members)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Corpus positions of the members, deduplicated; every unknown id is reported.
    pub fn resolve(&self, corpus: &Corpus) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        let mut nodes = Vec::with_capacity(self.members.len());
        for id in &self.members {
            match corpus.position(id) {
                Some(p) => nodes.push(p),
                None => missing.push(id.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::UnresolvedReference {
                name: self.name.clone(),
                missing,
            });
        }
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupScore {
    pub grouping: String,
    pub cluster: usize,
    pub correct: usize,
    pub missing: usize,
    pub non_famous: usize,
}

impl GroupScore {
    pub fn total(&self) -> usize {
        self.correct + self.missing
    }
}

/// Pairs a grouping with the cluster sharing the most members, lowest id on ties.
pub fn match_cluster(assignment: &[usize], name: &str, members: &[usize]) -> Result<GroupScore> {
    if members.is_empty() {
        return Err(Error::EmptyReference(name.to_string()));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; k];
    for &c in assignment {
        size[c] += 1;
    }
    let mut overlap = vec![0usize; k];
    for &m in members {
        let c = *assignment.get(m).ok_or_else(|| {
            Error::PartitionMismatch(format!(
                "member {m} outside a partition of {} nodes",
                assignment.len()
            ))
        })?;
        overlap[c] += 1;
    }
    let mut cluster = 0;
    for c in 1..k {
        if overlap[c] > overlap[cluster] {
            cluster = c;
        }
    }
    let correct = overlap[cluster];
    Ok(GroupScore {
        grouping: name.to_string(),
        cluster,
        correct,
        missing: members.len() - correct,
        non_famous: size[cluster] - correct,
    })
}

/// Micro-averaged fraction of reference members found: `Σ correct / Σ (correct + missing)`.
pub fn selection_rate(scores: &[GroupScore]) -> f64 {
    let correct: usize = scores.iter().map(|s| s.correct).sum();
    let total: usize = scores.iter().map(GroupScore::total).sum();
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub groupings: Vec<GroupScore>,
    pub selection_rate: f64,
}

impl EvaluationReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Scores every grouping against `partition`, whose nodes follow corpus order.
pub fn evaluate(
    partition: &Partition,
    corpus: &Corpus,
    groupings: &[ReferenceGrouping],
) -> Result<EvaluationReport> {
    if partition.assignment.len() != corpus.len() {
        return Err(Error::PartitionMismatch(format!(
            "partition has {} nodes, corpus has {} documents",
            partition.assignment.len(),
            corpus.len()
        )));
    }
    let groupings = groupings
        .iter()
        .map(|g| match_cluster(&partition.assignment, &g.name, &g.resolve(corpus)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        selection_rate: selection_rate(&groupings),
        groupings,
    })
}
