//! Synthetic fixtures shared by the benchmarks.

use cewe::corpus::{build_vocabularies_from_docs, tokenize_document};
use cewe::{CategoryVocabulary, Document, RawDocument, VocabConfig, Vocabulary};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-0.5..0.5))
}

/// Documents of `len` tokens drawn from a skewed distribution over `words`
/// words, each tagged with one to three of `categories` categories.
pub fn synthetic_corpus(seed: u64, docs: usize, len: usize, words: usize, categories: usize) -> Vec<RawDocument> {
    let mut r = rng(seed);
    (0..docs)
        .map(|_| {
            // Squaring a uniform draw favours low ids, giving a Zipf-like profile.
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    let u: f64 = r.random();
                    format!("w{}", ((u * u) * words as f64) as usize)
                })
                .collect();
            let n = r.random_range(1..=3);
            let cats: Vec<String> = (0..n).map(|_| format!("c{}", r.random_range(0..categories))).collect();
            RawDocument::new(cats, tokens)
        })
        .collect()
}

pub struct Fixture {
    pub vocab: Vocabulary,
    pub categories: CategoryVocabulary,
    pub docs: Vec<Document>,
}

impl Fixture {
    pub fn new(raw: &[RawDocument]) -> Self {
        let cfg = VocabConfig {
            min_count: 1,
            min_category_docs: 1,
            ..VocabConfig::default()
        };
        let (vocab, categories) = build_vocabularies_from_docs(raw, &cfg).expect("synthetic corpus is valid");
        let docs = raw.iter().map(|r| tokenize_document(r, &vocab, &categories)).collect();
        Fixture {
            vocab,
            categories,
            docs,
        }
    }
}
