//! Documents, labels and corpora, plus their on-disk formats.
//!
//! A document is one object view encoded as a sparse bag of visual words.
//! Corpora are stored either as line-oriented text (`<label> <N> <id>:<count> ...`)
//! or as the equivalent varint-packed binary stream; see [`bow`].

pub mod bow;
pub mod snapshot;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bow::{load_corpus, read_corpus, save_corpus, write_corpus, CorpusFormat};
pub use snapshot::{
    export_snapshot_text, load_snapshot, save_snapshot, CategorySnapshot, ModelSnapshot, SNAPSHOT_FORMAT_VERSION,
};

/// Index of a dictionary centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VisualWordId(pub u32);

impl VisualWordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for VisualWordId {
    fn from(id: u32) -> Self {
        Self(id)
    }
}

impl fmt::Display for VisualWordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sparse visual-word histogram for a single object view.
///
/// Counts are always ≥ 1 and iterate in increasing word-id order. An empty
/// document (`total_words == 0`) can be represented and loaded, but inference
/// rejects it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BowDocument {
    counts: BTreeMap<VisualWordId, u32>,
    total_words: u64,
    source_id: String,
}

impl BowDocument {
    pub fn empty(source_id: impl Into<String>) -> Self {
        Self {
            counts: BTreeMap::new(),
            total_words: 0,
            source_id: source_id.into(),
        }
    }

    /// Builds a document from `(word, count)` pairs. Repeated words are merged;
    /// zero counts are rejected.
    pub fn from_counts<I, W>(pairs: I, source_id: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (W, u32)>,
        W: Into<VisualWordId>,
    {
        let mut doc = Self::empty(source_id);
        for (word, count) in pairs {
            let word = word.into();
            if count == 0 {
                return Err(Error::Validation(format!(
                    "document {}: word {} has zero count",
                    doc.source_id, word
                )));
            }
            *doc.counts.entry(word).or_insert(0) += count;
            doc.total_words += u64::from(count);
        }
        Ok(doc)
    }

    /// One count per occurrence in `words`.
    pub fn from_words<I, W>(words: I, source_id: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = W>,
        W: Into<VisualWordId>,
    {
        let mut doc = Self::empty(source_id);
        for word in words {
            *doc.counts.entry(word.into()).or_insert(0) += 1;
            doc.total_words += 1;
        }
        doc
    }

    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    pub fn is_empty(&self) -> bool {
        self.total_words == 0
    }

    /// Number of distinct words.
    pub fn distinct_words(&self) -> usize {
        self.counts.len()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn set_source_id(&mut self, source_id: impl Into<String>) {
        self.source_id = source_id.into();
    }

    pub fn count(&self, word: VisualWordId) -> u32 {
        self.counts.get(&word).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<VisualWordId, u32> {
        &self.counts
    }

    /// `(word, count)` in increasing word order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (VisualWordId, u32)> + '_ {
        self.counts.iter().map(|(&w, &c)| (w, c))
    }

    pub fn max_word(&self) -> Option<VisualWordId> {
        self.counts.keys().next_back().copied()
    }

    /// Checks that every word id is below `dictionary_size`.
    pub fn validate(&self, dictionary_size: usize) -> Result<()> {
        match self.max_word() {
            Some(w) if w.index() >= dictionary_size => Err(Error::Validation(format!(
                "document {}: word id {} ≥ V={}",
                self.source_id, w, dictionary_size
            ))),
            _ => Ok(()),
        }
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Self {
        assert!(factor > 0, "scale factor must be positive");
        Self {
            counts: self.counts.iter().map(|(&w, &c)| (w, c * factor)).collect(),
            total_words: self.total_words * u64::from(factor),
            source_id: self.source_id.clone(),
        }
    }
}

/// Category name. Non-empty and free of whitespace and `#`, so that it can be
/// written verbatim into the text corpus format.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CategoryLabel(String);

impl CategoryLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Validation("category label must not be empty".into()));
        }
        if name.chars().any(|c| c.is_whitespace() || c == '#') {
            return Err(Error::Validation(format!(
                "category label {name:?} contains whitespace or '#'"
            )));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CategoryLabel {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CategoryLabel> for String {
    fn from(label: CategoryLabel) -> Self {
        label.0
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered list of labelled documents over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCorpus {
    pub dictionary_size: usize,
    pub documents: Vec<(BowDocument, CategoryLabel)>,
}

impl LabeledCorpus {
    pub fn new(dictionary_size: usize) -> Self {
        Self {
            dictionary_size,
            documents: Vec::new(),
        }
    }

    pub fn push(&mut self, doc: BowDocument, label: CategoryLabel) -> Result<()> {
        doc.validate(self.dictionary_size)?;
        self.documents.push((doc, label));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.documents
            .iter()
            .try_for_each(|(doc, _)| doc.validate(self.dictionary_size))
    }

    /// Document indices grouped by label, labels in lexicographic order.
    pub fn indices_by_label(&self) -> BTreeMap<CategoryLabel, Vec<usize>> {
        let mut groups: BTreeMap<CategoryLabel, Vec<usize>> = BTreeMap::new();
        for (i, (_, label)) in self.documents.iter().enumerate() {
            groups.entry(label.clone()).or_default().push(i);
        }
        groups
    }

    pub fn labels(&self) -> Vec<CategoryLabel> {
        self.indices_by_label().into_keys().collect()
    }

    /// Indices of documents with no words.
    pub fn empty_documents(&self) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, (doc, _))| doc.is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}
