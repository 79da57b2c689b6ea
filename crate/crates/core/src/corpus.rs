//! Corpus ingestion and per-method tokenization.
//!
//! A corpus file is line-delimited JSON, one hymn per line:
//!
//! ```text
//! {"id": "RV 1.1", "book": 1, "hymn": 1, "text": "..."}
//! ```
//!
//! Documents keep their file order. Text is normalized to NFC on load so that
//! precomposed diacritics survive the letters-only filter of [`PreprocessMode::LsaFull`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocumentId {
    pub book: u32,
    pub hymn: u32,
}

impl DocumentId {
    pub fn new(book: u32, hymn: u32) -> Result<Self> {
        if book == 0 || hymn == 0 {
            return Err(Error::InvalidId(format!("RV {book}.{hymn}")));
        }
        Ok(Self { book, hymn })
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RV {}.{}", self.book, self.hymn)
    }
}

impl FromStr for DocumentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidId(s.to_string());
        let rest = s.trim().strip_prefix("RV").ok_or_else(bad)?.trim_start();
        let (book, hymn) = rest.split_once('.').ok_or_else(bad)?;
        let book = book.parse().map_err(|_| bad())?;
        let hymn = hymn.parse().map_err(|_| bad())?;
        DocumentId::new(book, hymn).map_err(|_| bad())
    }
}

impl Serialize for DocumentId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DocumentId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: DocumentId,
    pub raw_text: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<DocumentId, usize>,
}

#[derive(Deserialize)]
struct Record {
    id: Option<String>,
    book: u32,
    hymn: u32,
    text: String,
}

impl Corpus {
    /// Builds a corpus from documents in order, rejecting duplicate ids and empty texts.
    pub fn from_documents(documents: impl IntoIterator<Item = Document>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for doc in documents {
            corpus.push(doc)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, mut doc: Document) -> Result<()> {
        doc.raw_text = doc.raw_text.nfc().collect();
        if doc.raw_text.trim().is_empty() {
            return Err(Error::EmptyText(doc.id.to_string()));
        }
        if self.index.contains_key(&doc.id) {
            return Err(Error::DuplicateId(doc.id.to_string()));
        }
        self.index.insert(doc.id, self.documents.len());
        self.documents.push(doc);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text)
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                msg: e.to_string(),
            })?;
            let id = DocumentId::new(rec.book, rec.hymn).map_err(|e| Error::MalformedRecord {
                line: line_no,
                msg: e.to_string(),
            })?;
            if let Some(label) = rec.id.as_deref() {
                let parsed: DocumentId =
                    label.parse().map_err(|e: Error| Error::MalformedRecord {
                        line: line_no,
                        msg: e.to_string(),
                    })?;
                if parsed != id {
                    return Err(Error::MalformedRecord {
                        line: line_no,
                        msg: format!(
                            "id {label:?} disagrees with book {} hymn {}",
                            rec.book, rec.hymn
                        ),
                    });
                }
            }
            match corpus.push(Document {
                id,
                raw_text: rec.text,
            }) {
                Err(Error::EmptyText(id)) => {
                    return Err(Error::MalformedRecord {
                        line: line_no,
                        msg: format!("document {id} has empty text"),
                    })
                }
                other => other?,
            }
        }
        Ok(corpus)
    }

    /// Serializes back to the line-delimited format accepted by [`Corpus::load`].
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let rec = serde_json::json!({
                "id": doc.id.to_string(),
                "book": doc.id.book,
                "hymn": doc.id.hymn,
                "text": doc.raw_text,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn ids(&self) -> impl Iterator<Item = DocumentId> + '_ {
        self.documents.iter().map(|d| d.id)
    }

    pub fn position(&self, id: &DocumentId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Number of hymns per book, in ascending book order.
    pub fn book_counts(&self) -> Vec<(u32, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.id.book).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    pub fn tokenize(&self, tokenizer: &Tokenizer) -> TokenizedCorpus {
        TokenizedCorpus {
            mode: tokenizer.mode,
            docs: self
                .documents
                .iter()
                .map(|d| tokenizer.tokenize(&d.raw_text))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessMode {
    /// Letters-only lowercase tokens with stopwords removed.
    LsaFull,
    /// Lowercase, split on whitespace.
    Doc2VecLight,
    /// Raw text as a single token.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.trim())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.nfc().collect::<String>().to_lowercase())
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    pub mode: PreprocessMode,
    pub stopwords: Stopwords,
}

impl Tokenizer {
    pub fn new(mode: PreprocessMode, stopwords: Stopwords) -> Self {
        Self { mode, stopwords }
    }

    pub fn lsa() -> Self {
        Self::new(PreprocessMode::LsaFull, Stopwords::english())
    }

    pub fn doc2vec() -> Self {
        Self::new(PreprocessMode::Doc2VecLight, Stopwords::default())
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self.mode {
            PreprocessMode::LsaFull => {
                let text: String = text.nfc().collect();
                text.split_whitespace()
                    .filter_map(|raw| {
                        let word: String = raw
                            .to_lowercase()
                            .chars()
                            .filter(|c| c.is_alphanumeric())
                            .collect();
                        // numerals and mixed alphanumerics are dropped whole
                        let keep = !word.is_empty()
                            && word.chars().all(char::is_alphabetic)
                            && !self.stopwords.contains(&word);
                        keep.then_some(word)
                    })
                    .collect()
            }
            PreprocessMode::Doc2VecLight => text
                .to_lowercase()
                .split_whitespace()
                .map(str::to_string)
                .collect(),
            PreprocessMode::None => {
                if text.is_empty() {
                    Vec::new()
                } else {
                    vec![text.to_string()]
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    pub mode: PreprocessMode,
    pub docs: Vec<Vec<String>>,
}

impl TokenizedCorpus {
    pub fn new(mode: PreprocessMode, docs: Vec<Vec<String>>) -> Self {
        Self { mode, docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Indices of documents that produced no tokens.
    pub fn empty_documents(&self) -> Vec<usize> {
        self.docs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    ids: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Keeps terms appearing in at least `min_df` documents; ids follow first occurrence.
    pub fn build(corpus: &TokenizedCorpus, min_df: usize) -> Result<Self> {
        let mut order: Vec<&str> = Vec::new();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in &corpus.docs {
            let mut seen = HashSet::new();
            for tok in doc {
                if !seen.insert(tok.as_str()) {
                    continue;
                }
                let count = df.entry(tok.as_str()).or_insert_with(|| {
                    order.push(tok.as_str());
                    0
                });
                *count += 1;
            }
        }

        let mut vocab = Vocabulary {
            terms: Vec::new(),
            ids: HashMap::new(),
            df: Vec::new(),
            n_docs: corpus.len(),
        };
        for term in order {
            let count = df[term];
            if count >= min_df {
                vocab.ids.insert(term.to_string(), vocab.terms.len());
                vocab.terms.push(term.to_string());
                vocab.df.push(count);
            }
        }
        if vocab.terms.is_empty() {
            return Err(Error::EmptyVocabulary { min_df });
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, id: usize) -> usize {
        self.df[id]
    }

    pub fn df_of(&self, term: &str) -> Option<usize> {
        self.id(term).map(|i| self.df[i])
    }

    /// Number of documents the vocabulary was built from.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Maps each document's tokens to term ids, dropping out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t)).collect()
    }
}
