//! Category-enhanced word embeddings.
//!
//! Trains CBOW-style word vectors jointly with category vectors (CeWE), with an
//! optional global pass where TF-IDF-selected words predict document categories
//! (GCeWE). Also includes word similarity / analogy evaluation and simple
//! document classification from the learned vectors.

pub mod corpus;
pub mod docrep;
pub mod eval;
pub mod model;
pub mod sampling;
pub mod trainer;

pub use corpus::{CategoryVocabulary, CorpusError, Document, RawDocument, VocabConfig, Vocabulary};
pub use model::{Embeddings, EmbeddingFormat, Model, ModelConfig, ModelError};
pub use trainer::{train, train_documents, LambdaCat, ModelKind, RunReport, TrainConfig, TrainError};
