//! Intrinsic evaluation: word similarity, word analogy and nearest neighbors.

use std::io::BufRead;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::model::{cosine, dot, nearest_neighbors, norm, Embeddings, Model, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rank correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("no usable pairs ({skipped} skipped)")]
    NoUsablePairs { skipped: usize },
    #[error("dataset line {line}: {reason}")]
    Dataset { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which word vectors to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VectorSource {
    #[default]
    Input,
    InputPlusOutput,
}

impl std::str::FromStr for VectorSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "w" => Ok(VectorSource::Input),
            "w_plus_wout" => Ok(VectorSource::InputPlusOutput),
            other => Err(format!("unknown vector source `{other}` (w|w_plus_wout)")),
        }
    }
}

/// Word vectors of a trained model, labeled by the vocabulary.
pub fn word_vectors(model: &Model, vocab: &Vocabulary, source: VectorSource) -> Embeddings {
    let matrix = match source {
        VectorSource::Input => model.words.clone(),
        VectorSource::InputPlusOutput => &model.words + &model.context,
    };
    Embeddings::new(vocab.words().to_vec(), matrix)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::UndefinedCorrelation("zero rank variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::UndefinedCorrelation("lists differ in length"));
    }
    if x.len() < 2 {
        return Err(EvalError::UndefinedCorrelation("fewer than two observations"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilarityDataset {
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// One `word1 word2 score` triple per line (tabs or spaces). Blank lines
    /// and lines starting with `#` are ignored.
    pub fn read<R: BufRead>(r: R) -> Result<Self, EvalError> {
        let mut pairs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let bad = |reason: String| EvalError::Dataset { line: i + 1, reason };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            }
            let score: f64 = fields[2]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| bad(format!("bad score `{}`", fields[2])))?;
            pairs.push((fields[0].to_owned(), fields[1].to_owned(), score));
        }
        Ok(SimilarityDataset { pairs })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityResult {
    pub rho: f64,
    pub used: usize,
    pub skipped: usize,
}

fn lookup(emb: &Embeddings, word: &str, lowercase: bool) -> Option<usize> {
    if lowercase {
        emb.id(&word.to_lowercase())
    } else {
        emb.id(word)
    }
}

/// Spearman correlation between model cosines and human scores over in-vocabulary pairs.
pub fn evaluate_similarity(
    emb: &Embeddings,
    dataset: &SimilarityDataset,
    lowercase: bool,
) -> Result<SimilarityResult, EvalError> {
    let mut model_scores = Vec::new();
    let mut human = Vec::new();
    let mut skipped = 0;
    for (a, b, score) in &dataset.pairs {
        let sim = match (lookup(emb, a, lowercase), lookup(emb, b, lowercase)) {
            (Some(i), Some(j)) => cosine(&emb.row(i).to_vec(), &emb.row(j).to_vec()).ok(),
            _ => None,
        };
        match sim {
            Some(s) => {
                model_scores.push(s);
                human.push(*score);
            }
            None => skipped += 1,
        }
    }
    if model_scores.is_empty() {
        return Err(EvalError::NoUsablePairs { skipped });
    }
    let rho = spearman(&model_scores, &human)?;
    Ok(SimilarityResult {
        rho,
        used: model_scores.len(),
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogySection {
    pub name: String,
    pub syntactic: bool,
    pub questions: Vec<[String; 4]>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnalogyDataset {
    pub sections: Vec<AnalogySection>,
}

impl AnalogyDataset {
    /// Sections start with `: name`; names beginning with `gram` are syntactic.
    pub fn read<R: BufRead>(r: R) -> Result<Self, EvalError> {
        let mut sections: Vec<AnalogySection> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix(':') {
                let name = name.trim().to_owned();
                sections.push(AnalogySection {
                    syntactic: name.starts_with("gram"),
                    name,
                    questions: Vec::new(),
                });
                continue;
            }
            let words: Vec<&str> = trimmed.split_whitespace().collect();
            let [a, b, c, d] = words[..] else {
                return Err(EvalError::Dataset {
                    line: i + 1,
                    reason: format!("expected 4 words, found {}", words.len()),
                });
            };
            if sections.is_empty() {
                sections.push(AnalogySection {
                    name: String::new(),
                    syntactic: false,
                    questions: Vec::new(),
                });
            }
            let section = sections.last_mut().expect("non-empty");
            section
                .questions
                .push([a.to_owned(), b.to_owned(), c.to_owned(), d.to_owned()]);
        }
        Ok(AnalogyDataset { sections })
    }

    pub fn num_questions(&self) -> usize {
        self.sections.iter().map(|s| s.questions.len()).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub correct: usize,
    pub answered: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.answered == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.answered as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyResult {
    pub semantic: Tally,
    pub syntactic: Tally,
    pub total: Tally,
    /// All questions in the dataset; `total.answered` of them were in vocabulary.
    pub questions: usize,
}

impl AnalogyResult {
    pub fn coverage(&self) -> f64 {
        self.total.answered as f64 / self.questions as f64
    }
}

/// Rows divided by their norms (zero rows stay zero).
fn unit_rows(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for mut row in out.outer_iter_mut() {
        let n = norm(row.as_slice().expect("owned rows are contiguous"));
        if n > 0.0 {
            row.mapv_inplace(|v| v / n);
        }
    }
    out
}

/// Argmax over rows other than `a`, `b`, `c` of cosine to `W[b] - W[a] + W[c]`;
/// ties go to the lowest id.
pub fn predict_analogy(emb: &Embeddings, a: usize, b: usize, c: usize) -> Option<usize> {
    let unit = unit_rows(emb.matrix());
    predict_with_units(emb.matrix(), unit.view(), a, b, c)
}

fn predict_with_units(
    raw: ArrayView2<'_, f64>,
    unit: ArrayView2<'_, f64>,
    a: usize,
    b: usize,
    c: usize,
) -> Option<usize> {
    let target: Vec<f64> = (0..raw.ncols())
        .map(|d| raw[[b, d]] - raw[[a, d]] + raw[[c, d]])
        .collect();
    let tn = norm(&target);
    if tn == 0.0 {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for (x, row) in unit.outer_iter().enumerate() {
        if x == a || x == b || x == c {
            continue;
        }
        let row = row.as_slice().expect("contiguous");
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        let sim = dot(row, &target) / tn;
        if best.is_none_or(|(_, s)| sim > s) {
            best = Some((x, sim));
        }
    }
    best.map(|(x, _)| x)
}

/// 3CosAdd analogy accuracy. Questions with any out-of-vocabulary word are excluded.
pub fn evaluate_analogy(emb: &Embeddings, dataset: &AnalogyDataset, lowercase: bool) -> AnalogyResult {
    let unit = unit_rows(emb.matrix());
    let raw = emb.matrix();
    let jobs: Vec<(bool, [usize; 4])> = dataset
        .sections
        .iter()
        .flat_map(|s| s.questions.iter().map(move |q| (s.syntactic, q)))
        .filter_map(|(syn, q)| {
            let mut ids = [0usize; 4];
            for (slot, w) in ids.iter_mut().zip(q) {
                *slot = lookup(emb, w, lowercase)?;
            }
            Some((syn, ids))
        })
        .collect();
    let outcomes: Vec<(bool, bool)> = jobs
        .par_iter()
        .map(|&(syn, [a, b, c, d])| {
            (syn, predict_with_units(raw, unit.view(), a, b, c) == Some(d))
        })
        .collect();
    let mut result = AnalogyResult {
        semantic: Tally::default(),
        syntactic: Tally::default(),
        total: Tally::default(),
        questions: dataset.num_questions(),
    };
    for (syn, ok) in outcomes {
        let bucket = if syn {
            &mut result.syntactic
        } else {
            &mut result.semantic
        };
        for t in [bucket, &mut result.total] {
            t.answered += 1;
            t.correct += usize::from(ok);
        }
    }
    result
}

/// Words nearest (by cosine) to a category vector.
pub fn nearest_words_to_category(
    words: ArrayView2<'_, f64>,
    categories: ArrayView2<'_, f64>,
    category: usize,
    k: usize,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let query = categories.row(category).to_vec();
    nearest_neighbors(&query, words, k, &[])
}

/// Other categories nearest to a category vector.
pub fn nearest_categories_to_category(
    categories: ArrayView2<'_, f64>,
    category: usize,
    k: usize,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let query = categories.row(category).to_vec();
    nearest_neighbors(&query, categories, k, &[category])
}

/// Other words nearest to a word vector.
pub fn nearest_words_to_word(
    words: ArrayView2<'_, f64>,
    word: usize,
    k: usize,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let query = words.row(word).to_vec();
    nearest_neighbors(&query, words, k, &[word])
}
