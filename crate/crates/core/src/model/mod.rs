//! Embedding parameters, cosine geometry and nearest-neighbor search.

mod io;

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use io::{
    embedding_paths, load_embeddings, read_embeddings, save_embeddings, write_embeddings,
    EmbeddingFormat,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: 300, seed: 1 }
    }
}

/// Input word vectors, output word vectors and category vectors, all of width `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub words: Array2<f64>,
    pub context: Array2<f64>,
    pub categories: Array2<f64>,
}

impl Model {
    /// Input word vectors and category vectors are uniform on `[-0.5/D, 0.5/D)`;
    /// output word vectors start at zero.
    ///
    /// The two uniform matrices come from separate RNG streams, so the word
    /// matrix does not depend on the number of categories.
    pub fn init(config: ModelConfig, num_words: usize, num_categories: usize) -> Self {
        assert!(config.dim >= 1, "dim must be at least 1");
        assert!(num_words >= 1, "vocabulary must not be empty");
        let dim = config.dim;
        let scale = 1.0 / dim as f64;
        let draw = |stream: u64, rows: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream);
            Array2::from_shape_simple_fn((rows, dim), || (rng.random::<f64>() - 0.5) * scale)
        };
        Model {
            words: draw(0, num_words),
            categories: draw(1, num_categories),
            context: Array2::zeros((num_words, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.words.ncols()
    }

    pub fn num_words(&self) -> usize {
        self.words.nrows()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.words.iter().all(|v| v.is_finite())
            && self.context.iter().all(|v| v.is_finite())
            && self.categories.iter().all(|v| v.is_finite())
    }
}

pub fn init_model(config: ModelConfig, num_words: usize, num_categories: usize) -> Model {
    Model::init(config, num_words, num_categories)
}

/// A labeled embedding matrix: row `i` belongs to `labels[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl Embeddings {
    pub fn new(labels: Vec<String>, matrix: Array2<f64>) -> Self {
        assert_eq!(labels.len(), matrix.nrows(), "one label per row");
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Embeddings {
            labels,
            index,
            matrix,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn row(&self, id: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(id)
    }

    pub fn into_parts(self) -> (Vec<String>, Array2<f64>) {
        (self.labels, self.matrix)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, ModelError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(ModelError::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Top-`k` rows of `matrix` by cosine to `query`, descending, ties by ascending id.
///
/// Rows listed in `exclude` and zero rows are skipped. Returns fewer than `k`
/// entries when fewer candidates exist.
pub fn nearest_neighbors(
    query: &[f64],
    matrix: ArrayView2<'_, f64>,
    k: usize,
    exclude: &[usize],
) -> Result<Vec<(usize, f64)>, ModelError> {
    if query.len() != matrix.ncols() {
        return Err(ModelError::DimensionMismatch {
            expected: matrix.ncols(),
            found: query.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 {
        return Err(ModelError::ZeroNorm);
    }
    let mut hits: Vec<(usize, f64)> = Vec::with_capacity(matrix.nrows());
    for (id, row) in matrix.outer_iter().enumerate() {
        if exclude.contains(&id) {
            continue;
        }
        let row = row.to_slice().map(|s| s.to_vec()).unwrap_or_else(|| row.to_vec());
        let rn = norm(&row);
        if rn == 0.0 {
            continue;
        }
        hits.push((id, (dot(query, &row) / (qn * rn)).clamp(-1.0, 1.0)));
    }
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    hits.truncate(k);
    Ok(hits)
}
