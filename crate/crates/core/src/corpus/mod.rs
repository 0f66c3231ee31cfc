//! Corpus parsing, vocabulary construction and TF-IDF word selection.

mod format;
mod vocab;

use std::io;

use thiserror::Error;

pub use format::{parse_corpus, write_corpus, write_record, CorpusReader, RawDocument, HEADER_TAG};
pub use vocab::{
    build_vocabularies, build_vocabularies_from_docs, read_category_vocab, read_vocab,
    write_category_vocab, write_vocab, CategoryVocabulary, VocabConfig, Vocabulary,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: io::Error },
    #[error("I/O error near line {line}: {source}")]
    Io { line: usize, source: io::Error },
    #[error("malformed corpus at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("malformed vocabulary file at line {line}: {reason}")]
    VocabFormat { line: usize, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
}

/// A record mapped onto vocabulary ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    pub word_ids: Vec<usize>,
    /// Sorted ascending, no duplicates.
    pub category_ids: Vec<usize>,
}

impl Document {
    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    /// Distinct word ids in first-occurrence order, paired with their in-document counts.
    pub fn term_counts(&self) -> Vec<(usize, u32)> {
        let mut order: Vec<(usize, u32)> = Vec::new();
        let mut slot: std::collections::HashMap<usize, usize> = std::collections::HashMap::with_capacity(self.word_ids.len());
        for &w in &self.word_ids {
            match slot.get(&w) {
                Some(&i) => order[i].1 += 1,
                None => {
                    slot.insert(w, order.len());
                    order.push((w, 1));
                }
            }
        }
        order
    }
}

/// Maps a raw record onto the vocabularies. Unknown tokens and categories are dropped.
pub fn tokenize_document(
    raw: &RawDocument,
    vocab: &Vocabulary,
    categories: &CategoryVocabulary,
) -> Document {
    let word_ids = raw.tokens.iter().filter_map(|t| vocab.id(t)).collect();
    let mut category_ids: Vec<usize> =
        raw.categories.iter().filter_map(|c| categories.id(c)).collect();
    category_ids.sort_unstable();
    category_ids.dedup();
    Document {
        word_ids,
        category_ids,
    }
}

/// TF-IDF of each distinct word in the document (raw count times idf),
/// in first-occurrence order.
pub fn tfidf_scores(doc: &Document, vocab: &Vocabulary) -> Vec<(usize, f64)> {
    doc.term_counts()
        .into_iter()
        .map(|(w, tf)| (w, f64::from(tf) * vocab.idf(w)))
        .collect()
}

/// Words whose TF-IDF exceeds the document's mean TF-IDF over distinct words.
///
/// Returns an empty list when nothing is strictly above the mean. Values
/// within 1e-12 (relative) of the mean count as ties.
pub fn select_global_words(doc: &Document, vocab: &Vocabulary) -> Vec<usize> {
    let scores = tfidf_scores(doc, vocab);
    if scores.is_empty() {
        return Vec::new();
    }
    let avg = scores.iter().map(|&(_, s)| s).sum::<f64>() / scores.len() as f64;
    let threshold = avg + 1e-12 * avg.abs();
    scores
        .into_iter()
        .filter(|&(_, s)| s > threshold)
        .map(|(w, _)| w)
        .collect()
}
