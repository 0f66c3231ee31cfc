//! Document features from TF-IDF-selected word vectors, and a linear classifier.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{select_global_words, tokenize_document, CategoryVocabulary, Document, RawDocument, Vocabulary};
use crate::trainer::{sigmoid, softplus};

#[derive(Debug, Error, PartialEq)]
pub enum DocRepError {
    #[error("document has no in-vocabulary words")]
    EmptyFeature,
    #[error("need at least two classes with one example each")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
}

/// Mean word vector over the document's selected words; falls back to the mean
/// over all distinct words when nothing is selected.
///
/// `words` rows are indexed by `vocab` ids.
pub fn document_embedding(
    words: ArrayView2<'_, f64>,
    doc: &Document,
    vocab: &Vocabulary,
) -> Result<Vec<f64>, DocRepError> {
    if doc.is_empty() {
        return Err(DocRepError::EmptyFeature);
    }
    let mut chosen = select_global_words(doc, vocab);
    if chosen.is_empty() {
        chosen = doc.term_counts().into_iter().map(|(w, _)| w).collect();
    }
    let mut out = vec![0.0; words.ncols()];
    for &w in &chosen {
        for (o, v) in out.iter_mut().zip(words.row(w)) {
            *o += v;
        }
    }
    let scale = 1.0 / chosen.len() as f64;
    out.iter_mut().for_each(|o| *o *= scale);
    Ok(out)
}

/// Documents with one class label each (the first category of the record).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledDocumentSet {
    pub documents: Vec<Document>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDocumentSet {
    /// Records without any category are dropped. Classes are numbered in
    /// order of first appearance.
    pub fn from_raw(raw: &[RawDocument], vocab: &Vocabulary) -> Self {
        let none = CategoryVocabulary::empty();
        let mut set = LabeledDocumentSet::default();
        for r in raw {
            let Some(label) = r.categories.first() else {
                continue;
            };
            let class = match set.class_names.iter().position(|c| c == label) {
                Some(i) => i,
                None => {
                    set.class_names.push(label.clone());
                    set.class_names.len() - 1
                }
            };
            set.documents.push(tokenize_document(r, vocab, &none));
            set.labels.push(class);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// One-vs-rest linear scorer: class `k` scores `w_k · z + b_k` where
/// `z = (x - shift) * scale` elementwise.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearClassifier {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearClassifier {
            weights: Array2::zeros((classes, dim)),
            bias: vec![0.0; classes],
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    fn standardized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, DocRepError> {
        if x.len() != self.dim() {
            return Err(DocRepError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let z = self.standardized(x);
        Ok(self
            .weights
            .outer_iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(&z).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect())
    }

    /// Mean one-vs-rest logistic loss plus `l2/2 * ||W||^2`.
    pub fn loss(&self, features: &[Vec<f64>], labels: &[usize], l2: f64) -> f64 {
        let mut total = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let scores = self.scores(x).expect("feature dimension");
            for (k, z) in scores.into_iter().enumerate() {
                total += if k == y { softplus(-z) } else { softplus(z) };
            }
        }
        let reg = 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        total / features.len() as f64 + reg
    }
}

/// Highest-scoring class, lowest id on ties.
pub fn classify(clf: &LinearClassifier, feature: &[f64]) -> Result<usize, DocRepError> {
    let scores = clf.scores(feature)?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
    /// Center and scale each feature by its training mean and standard deviation.
    pub standardize: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            epochs: 100,
            lr: 0.1,
            l2: 1e-4,
            seed: 1,
            standardize: true,
        }
    }
}

pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    cfg: &ClassifierConfig,
) -> Result<LinearClassifier, DocRepError> {
    train_classifier_with_losses(features, labels, cfg).map(|(c, _)| c)
}

/// One-vs-rest logistic regression by SGD with an L2 penalty, starting from zero.
/// Also returns the training loss after each epoch.
///
/// Averaged word vectors tend to share a large common component, which makes
/// plain SGD very slow to pick up the class signal; standardization removes it.
pub fn train_classifier_with_losses(
    features: &[Vec<f64>],
    labels: &[usize],
    cfg: &ClassifierConfig,
) -> Result<(LinearClassifier, Vec<f64>), DocRepError> {
    if features.len() != labels.len() {
        return Err(DocRepError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; classes];
    labels.iter().for_each(|&y| present[y] = true);
    if classes < 2 || present.iter().any(|p| !p) {
        return Err(DocRepError::DegenerateLabels);
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|x| x.len() != dim) {
        return Err(DocRepError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }

    let mut clf = LinearClassifier::zeros(classes, dim);
    if cfg.standardize {
        let n = features.len() as f64;
        for d in 0..dim {
            let mean = features.iter().map(|x| x[d]).sum::<f64>() / n;
            let var = features.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / n;
            clf.shift[d] = mean;
            clf.scale[d] = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        }
    }
    let standardized: Vec<Vec<f64>> = features.iter().map(|x| clf.standardized(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        if cfg.lr != 0.0 {
            for &i in &order {
                let x = &standardized[i];
                for k in 0..classes {
                    let mut w = clf.weights.row_mut(k);
                    let z = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + clf.bias[k];
                    let g = sigmoid(z) - if labels[i] == k { 1.0 } else { 0.0 };
                    for (wd, xd) in w.iter_mut().zip(x) {
                        *wd -= cfg.lr * (g * xd + cfg.l2 * *wd);
                    }
                    clf.bias[k] -= cfg.lr * g;
                }
            }
        }
        losses.push(clf.loss(features, labels, cfg.l2));
    }
    Ok((clf, losses))
}

/// TSV rows: class name, then the feature values.
pub fn write_features<W: Write + ?Sized>(
    w: &mut W,
    rows: impl IntoIterator<Item = (impl AsRef<str>, impl AsRef<[f64]>)>,
) -> std::io::Result<()> {
    for (label, values) in rows {
        w.write_all(label.as_ref().as_bytes())?;
        for v in values.as_ref() {
            write!(w, "\t{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}
