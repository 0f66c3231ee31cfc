#![allow(dead_code)]

pub mod checks;
pub mod grad;
pub mod stats;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cewe::corpus::{build_vocabularies_from_docs, tokenize_document, write_corpus};
use cewe::{CategoryVocabulary, Document, RawDocument, VocabConfig, Vocabulary};
use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}

pub fn vocab_config() -> VocabConfig {
    VocabConfig {
        min_count: 1,
        min_category_docs: 1,
        ..VocabConfig::default()
    }
}

pub struct Fixture {
    pub raw: Vec<RawDocument>,
    pub vocab: Vocabulary,
    pub categories: CategoryVocabulary,
    pub docs: Vec<Document>,
}

impl Fixture {
    pub fn new(raw: Vec<RawDocument>) -> Self {
        let (vocab, categories) = build_vocabularies_from_docs(&raw, &vocab_config()).unwrap();
        let docs = raw.iter().map(|r| tokenize_document(r, &vocab, &categories)).collect();
        Fixture {
            raw,
            vocab,
            categories,
            docs,
        }
    }

    pub fn write(&self, dir: &Path, name: &str) -> PathBuf {
        write_raw(&self.raw, dir, name)
    }
}

pub fn write_raw(raw: &[RawDocument], dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).unwrap());
    write_corpus(&mut w, raw).unwrap();
    path
}

/// 200 documents over ~300 Zipf-ish words, each tagged with 0-3 of 10 categories.
pub fn fixture_corpus(seed: u64) -> Vec<RawDocument> {
    let mut rng = rng(seed);
    let words: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
    let weights: Vec<f64> = (0..300).map(|i| 1.0 / (i as f64 + 2.0)).collect();
    let total: f64 = weights.iter().sum();
    let pick = |rng: &mut ChaCha8Rng| {
        let mut u = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        weights.len() - 1
    };
    (0..200)
        .map(|d| {
            let len = rng.random_range(20..60);
            // Each document leans on a window of the vocabulary so tf-idf varies.
            let offset = (d * 7) % 250;
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    let i = if rng.random_bool(0.5) {
                        pick(&mut rng)
                    } else {
                        offset + rng.random_range(0..50)
                    };
                    words[i].clone()
                })
                .collect();
            let ncat = rng.random_range(0..=3);
            let mut cats: Vec<String> = (0..ncat).map(|_| format!("cat{}", rng.random_range(0..10))).collect();
            cats.dedup();
            RawDocument::new(cats, tokens)
        })
        .collect()
}

pub fn strip_categories(raw: &[RawDocument]) -> Vec<RawDocument> {
    raw.iter()
        .map(|r| RawDocument::new(Vec::<String>::new(), r.tokens.clone()))
        .collect()
}

pub struct Topics {
    pub raw: Vec<RawDocument>,
    pub topic_words: [Vec<String>; 2],
}

/// 400 documents drawn from two disjoint 50-word topics plus 20 shared
/// function words; each document is tagged with its topic.
pub fn two_topic_corpus(seed: u64) -> Topics {
    let mut rng = rng(seed);
    let topic_words = [
        (0..50).map(|i| format!("alpha{i}")).collect::<Vec<_>>(),
        (0..50).map(|i| format!("beta{i}")).collect::<Vec<_>>(),
    ];
    let function: Vec<String> = (0..20).map(|i| format!("fn{i}")).collect();
    let raw = (0..400)
        .map(|d| {
            let topic = d % 2;
            let len = 50;
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.7) {
                        topic_words[topic].choose(&mut rng).unwrap().clone()
                    } else {
                        function.choose(&mut rng).unwrap().clone()
                    }
                })
                .collect();
            RawDocument::new([["topicA", "topicB"][topic]], tokens)
        })
        .collect();
    Topics { raw, topic_words }
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Mean intra-topic pairwise cosine minus mean inter-topic cosine.
pub fn topic_margin(words: &Array2<f64>, vocab: &Vocabulary, topics: &[Vec<String>; 2]) -> f64 {
    let rows: Vec<Vec<Vec<f64>>> = topics
        .iter()
        .map(|t| t.iter().map(|w| words.row(vocab.id(w).unwrap()).to_vec()).collect())
        .collect();
    let (mut intra, mut n_intra) = (0.0, 0usize);
    for group in &rows {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                intra += cos(&group[i], &group[j]);
                n_intra += 1;
            }
        }
    }
    let (mut inter, mut n_inter) = (0.0, 0usize);
    for a in &rows[0] {
        for b in &rows[1] {
            inter += cos(a, b);
            n_inter += 1;
        }
    }
    intra / n_intra as f64 - inter / n_inter as f64
}
