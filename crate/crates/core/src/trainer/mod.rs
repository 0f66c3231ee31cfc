//! SGD training of CBOW, CeWE and GCeWE models.
//!
//! Each document gets a local pass over its context windows, followed (GCeWE
//! only) by a global pass where TF-IDF-selected words predict the document's
//! categories with adaptively sampled negative categories. Workers share the
//! parameters without locks.

mod shared;
mod step;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{
    parse_corpus, select_global_words, tokenize_document, CategoryVocabulary, CorpusError,
    Document, Vocabulary,
};
use crate::model::Model;
use crate::sampling::{
    sample_negative_word, subsample_keep_probability, CategoryRankIndex, GeometricRankSampler,
    NegativeCategorySampler, UnigramTable, DEFAULT_MAX_ATTEMPTS, DEFAULT_NOISE_POWER,
    DEFAULT_TABLE_SIZE,
};

pub use shared::{SharedMatrix, SharedModel};
pub use step::{
    composite_context, global_step, learning_rate, local_window_step, negative_sampling_update,
    sigmoid, softplus, ContextWeights, Scratch,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("corpus does not match vocabularies: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("non-finite parameter after epoch {epoch}")]
    NonFinite { epoch: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Cbow,
    Cewe,
    Gcewe,
}

impl ModelKind {
    pub fn uses_categories(self) -> bool {
        !matches!(self, ModelKind::Cbow)
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cbow" => Ok(ModelKind::Cbow),
            "cewe" => Ok(ModelKind::Cewe),
            "gcewe" => Ok(ModelKind::Gcewe),
            other => Err(format!("unknown model `{other}` (cbow|cewe|gcewe)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cbow => "cbow",
            ModelKind::Cewe => "cewe",
            ModelKind::Gcewe => "gcewe",
        })
    }
}

/// Weight of the mean category vector in the composite context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaCat {
    /// `1 / cw`, where `cw` is the number of context words in the window.
    ReciprocalCw,
    Fixed(f64),
}

impl LambdaCat {
    pub fn value(self, context_words: usize) -> f64 {
        match self {
            LambdaCat::ReciprocalCw => 1.0 / context_words as f64,
            LambdaCat::Fixed(v) => v,
        }
    }
}

impl FromStr for LambdaCat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reciprocal_cw" | "1/cw" => Ok(LambdaCat::ReciprocalCw),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(LambdaCat::Fixed)
                .ok_or_else(|| format!("lambda-cat must be `reciprocal_cw` or a number, got `{v}`")),
        }
    }
}

impl fmt::Display for LambdaCat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaCat::ReciprocalCw => f.write_str("reciprocal_cw"),
            LambdaCat::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dim: usize,
    /// Half-window: up to `window` words on each side.
    pub window: usize,
    pub negatives_words: usize,
    pub negatives_categories: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_cat: LambdaCat,
    pub lambda_rank: f64,
    /// Subsampling threshold; 0 disables subsampling.
    pub subsample_t: f64,
    pub epochs: usize,
    pub workers: usize,
    pub refresh_interval: u64,
    pub seed: u64,
    pub lr_floor_ratio: f64,
    pub decay_beta: bool,
    pub noise_power: f64,
    pub table_size: usize,
    pub max_attempts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Gcewe,
            dim: 300,
            window: 5,
            negatives_words: 20,
            negatives_categories: 20,
            alpha: 0.02,
            beta: 0.015,
            lambda_cat: LambdaCat::ReciprocalCw,
            lambda_rank: 5.0,
            subsample_t: 1e-4,
            epochs: 2,
            workers: 1,
            refresh_interval: 50_000,
            seed: 1,
            lr_floor_ratio: 1e-4,
            decay_beta: true,
            noise_power: DEFAULT_NOISE_POWER,
            table_size: DEFAULT_TABLE_SIZE,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_owned()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        if !positive(self.alpha) || !positive(self.beta) {
            return fail("learning rates must be positive");
        }
        if !positive(self.lambda_rank) {
            return fail("lambda-rank must be positive");
        }
        if !(self.subsample_t.is_finite() && self.subsample_t >= 0.0) {
            return fail("subsample threshold must be >= 0");
        }
        if !(self.lr_floor_ratio > 0.0 && self.lr_floor_ratio <= 1.0) {
            return fail("lr floor ratio must be in (0, 1]");
        }
        if self.refresh_interval == 0 {
            return fail("refresh interval must be at least 1");
        }
        if self.table_size == 0 || self.max_attempts == 0 {
            return fail("table size and max attempts must be at least 1");
        }
        Ok(())
    }
}

/// Immutable sampling state shared by all workers.
pub struct Samplers {
    pub noise: UnigramTable,
    /// Per-word keep probability; `None` when subsampling is off.
    pub keep: Option<Vec<f64>>,
}

impl Samplers {
    pub fn new(vocab: &Vocabulary, cfg: &TrainConfig) -> Self {
        let noise = UnigramTable::new(
            vocab.counts(),
            cfg.noise_power,
            cfg.table_size.max(vocab.len()),
        );
        let keep = (cfg.subsample_t > 0.0).then(|| {
            (0..vocab.len())
                .map(|w| subsample_keep_probability(vocab.frequency(w), cfg.subsample_t))
                .collect()
        });
        Samplers { noise, keep }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub sum: f64,
    pub count: u64,
}

impl LossStats {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    fn add(&mut self, other: LossStats) {
        self.sum += other.sum;
        self.count += other.count;
    }
}

/// Per-worker buffers reused across documents.
pub struct Workspace {
    scratch: Scratch,
    kept: Vec<usize>,
    context: Vec<usize>,
    negatives: Vec<usize>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Workspace {
            scratch: Scratch::new(dim),
            kept: Vec::new(),
            context: Vec::new(),
            negatives: Vec::new(),
        }
    }
}

/// Local pass over one document: every token surviving subsampling is predicted
/// from its clipped window (and, for CeWE/GCeWE, the document categories).
pub fn train_document_local<R: Rng + ?Sized>(
    params: &SharedModel,
    doc: &Document,
    cfg: &TrainConfig,
    samplers: &Samplers,
    rng: &mut R,
    lr: f64,
    ws: &mut Workspace,
) -> LossStats {
    let Workspace {
        scratch,
        kept,
        context,
        negatives,
    } = ws;
    step::subsample(&doc.word_ids, samplers.keep.as_deref(), rng, kept);
    let categories: &[usize] = if cfg.model.uses_categories() {
        &doc.category_ids
    } else {
        &[]
    };
    let can_sample = samplers.noise.vocab_size() >= 2;
    let mut stats = LossStats::default();
    for pos in 0..kept.len() {
        step::window_context(kept, pos, cfg.window, context);
        if context.is_empty() {
            continue;
        }
        let target = kept[pos];
        negatives.clear();
        if can_sample {
            for _ in 0..cfg.negatives_words {
                negatives.push(sample_negative_word(&samplers.noise, rng, target));
            }
        }
        let lambda = cfg.lambda_cat.value(context.len());
        stats.sum += local_window_step(params, context, categories, lambda, target, negatives, lr, scratch);
        stats.count += 1;
    }
    stats
}

/// Rank index shared by workers, swapped wholesale on refresh.
pub struct GlobalState {
    index: RwLock<Arc<CategoryRankIndex>>,
    steps: AtomicU64,
    refresh_interval: u64,
    ranks: GeometricRankSampler,
    max_attempts: usize,
}

impl GlobalState {
    pub fn new(params: &SharedModel, cfg: &TrainConfig) -> Self {
        let index = CategoryRankIndex::build(params.categories.to_array().view());
        let ranks = GeometricRankSampler::new(cfg.lambda_rank, params.categories.rows());
        GlobalState {
            index: RwLock::new(Arc::new(index)),
            steps: AtomicU64::new(0),
            refresh_interval: cfg.refresh_interval,
            ranks,
            max_attempts: cfg.max_attempts,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::Relaxed)
    }

    pub fn index(&self) -> Arc<CategoryRankIndex> {
        self.index.read().clone()
    }

    /// Counts one global step; the worker whose step lands on a refresh
    /// boundary rebuilds the index from the current category vectors.
    fn record_step(&self, params: &SharedModel) {
        let n = self.steps.fetch_add(1, Ordering::Relaxed) + 1;
        if n % self.refresh_interval == 0 {
            let current = self.index();
            let next = current.refreshed(params.categories.to_array().view());
            *self.index.write() = Arc::new(next);
        }
    }
}

/// Global pass: each selected word predicts each of the document's categories.
#[allow(clippy::too_many_arguments)]
pub fn train_document_global<R: Rng + ?Sized>(
    params: &SharedModel,
    doc: &Document,
    selected: &[usize],
    cfg: &TrainConfig,
    global: &GlobalState,
    rng: &mut R,
    lr: f64,
    ws: &mut Workspace,
) -> LossStats {
    let mut stats = LossStats::default();
    let positives = &doc.category_ids;
    if selected.is_empty() || positives.is_empty() {
        return stats;
    }
    let num_negatives = if params.categories.rows() > positives.len() {
        cfg.negatives_categories
    } else {
        0
    };
    let mut word_vec = vec![0.0; params.dim()];
    for &l in selected {
        for &i in positives {
            let index = global.index();
            params.words.read_row(l, &mut word_vec);
            let sampler =
                NegativeCategorySampler::new(&word_vec, &index, &global.ranks, global.max_attempts);
            ws.negatives.clear();
            for _ in 0..num_negatives {
                ws.negatives.push(sampler.sample(positives, rng));
            }
            stats.sum += global_step(params, l, i, &ws.negatives, lr, &mut ws.scratch);
            stats.count += 1;
            global.record_step(params);
        }
    }
    stats
}

/// A re-iterable stream of tokenized documents.
pub trait DocumentSource: Sync {
    fn documents(&self) -> Result<Box<dyn Iterator<Item = Result<Document, CorpusError>> + '_>, CorpusError>;
}

impl DocumentSource for [Document] {
    fn documents(&self) -> Result<Box<dyn Iterator<Item = Result<Document, CorpusError>> + '_>, CorpusError> {
        Ok(Box::new(self.iter().cloned().map(Ok)))
    }
}

impl DocumentSource for Vec<Document> {
    fn documents(&self) -> Result<Box<dyn Iterator<Item = Result<Document, CorpusError>> + '_>, CorpusError> {
        self.as_slice().documents()
    }
}

/// A corpus file tokenized on the fly against fixed vocabularies.
pub struct CorpusFile<'a> {
    pub path: PathBuf,
    pub vocab: &'a Vocabulary,
    pub categories: &'a CategoryVocabulary,
}

impl<'a> CorpusFile<'a> {
    pub fn new(path: &Path, vocab: &'a Vocabulary, categories: &'a CategoryVocabulary) -> Self {
        CorpusFile {
            path: path.to_owned(),
            vocab,
            categories,
        }
    }
}

impl DocumentSource for CorpusFile<'_> {
    fn documents(&self) -> Result<Box<dyn Iterator<Item = Result<Document, CorpusError>> + '_>, CorpusError> {
        let reader = parse_corpus(&self.path)?;
        Ok(Box::new(reader.map(move |raw| {
            raw.map(|raw| tokenize_document(&raw, self.vocab, self.categories))
        })))
    }
}

/// Summary of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub tokens: u64,
    pub global_steps: u64,
    pub final_lr_alpha: f64,
    pub final_lr_beta: f64,
    pub mean_local_loss: f64,
    pub mean_global_loss: f64,
    pub wall_seconds: f64,
    pub epoch_local_loss: Vec<f64>,
    pub epoch_global_loss: Vec<f64>,
    /// Mean local loss per block of 10^6 processed tokens.
    pub loss_per_million: Vec<(u64, f64)>,
}

impl RunReport {
    /// Plain `key=value` lines.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "tokens={}", self.tokens)?;
        writeln!(w, "steps={}", self.global_steps)?;
        writeln!(w, "final_lr_alpha={}", self.final_lr_alpha)?;
        writeln!(w, "final_lr_beta={}", self.final_lr_beta)?;
        writeln!(w, "mean_local_loss={}", self.mean_local_loss)?;
        writeln!(w, "mean_global_loss={}", self.mean_global_loss)?;
        writeln!(w, "wall_seconds={:.3}", self.wall_seconds)?;
        for (e, l) in self.epoch_local_loss.iter().enumerate() {
            writeln!(w, "epoch{}_mean_local_loss={l}", e + 1)?;
        }
        for (e, l) in self.epoch_global_loss.iter().enumerate() {
            writeln!(w, "epoch{}_mean_global_loss={l}", e + 1)?;
        }
        for (block, l) in &self.loss_per_million {
            writeln!(w, "local_loss_mtok{block}={l}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct WorkerStats {
    local: LossStats,
    global: LossStats,
    blocks: BTreeMap<u64, LossStats>,
}

struct Checked {
    total_tokens: u64,
}

fn check_source<S: DocumentSource + ?Sized>(
    source: &S,
    vocab: &Vocabulary,
    categories: &CategoryVocabulary,
) -> Result<Checked, TrainError> {
    let mut total = 0u64;
    for doc in source.documents()? {
        let doc = doc?;
        if let Some(&w) = doc.word_ids.iter().find(|&&w| w >= vocab.len()) {
            return Err(TrainError::Mismatch(format!("word id {w} outside vocabulary")));
        }
        if let Some(&c) = doc.category_ids.iter().find(|&&c| c >= categories.len()) {
            return Err(TrainError::Mismatch(format!("category id {c} outside vocabulary")));
        }
        total += doc.word_ids.len() as u64;
    }
    if total == 0 {
        return Err(TrainError::Mismatch("corpus has no in-vocabulary tokens".into()));
    }
    Ok(Checked { total_tokens: total })
}

/// Trains `model` in place on a corpus file.
///
/// The corpus is validated against `vocab` (in-vocabulary token total must
/// equal the vocabulary's count total) before any parameter changes.
pub fn train(
    model: &mut Model,
    corpus: &Path,
    vocab: &Vocabulary,
    categories: &CategoryVocabulary,
    cfg: &TrainConfig,
) -> Result<RunReport, TrainError> {
    let source = CorpusFile::new(corpus, vocab, categories);
    let checked = check_source(&source, vocab, categories)?;
    if checked.total_tokens != vocab.total_tokens() {
        return Err(TrainError::Mismatch(format!(
            "corpus has {} in-vocabulary tokens, vocabulary counts {}",
            checked.total_tokens,
            vocab.total_tokens()
        )));
    }
    train_checked(model, &source, vocab, categories, cfg, checked)
}

/// Trains on any document source (e.g. an in-memory `Vec<Document>`).
pub fn train_documents<S: DocumentSource + ?Sized>(
    model: &mut Model,
    source: &S,
    vocab: &Vocabulary,
    categories: &CategoryVocabulary,
    cfg: &TrainConfig,
) -> Result<RunReport, TrainError> {
    let checked = check_source(source, vocab, categories)?;
    train_checked(model, source, vocab, categories, cfg, checked)
}

fn train_checked<S: DocumentSource + ?Sized>(
    model: &mut Model,
    source: &S,
    vocab: &Vocabulary,
    categories: &CategoryVocabulary,
    cfg: &TrainConfig,
    checked: Checked,
) -> Result<RunReport, TrainError> {
    cfg.validate()?;
    if model.dim() != cfg.dim {
        return Err(TrainError::Mismatch(format!(
            "model dim {} but configuration dim {}",
            model.dim(),
            cfg.dim
        )));
    }
    if model.num_words() != vocab.len() || model.num_categories() != categories.len() {
        return Err(TrainError::Mismatch(format!(
            "model has {}x{} rows, vocabularies have {}x{}",
            model.num_words(),
            model.num_categories(),
            vocab.len(),
            categories.len()
        )));
    }

    let started = Instant::now();
    let total = checked.total_tokens;
    let samplers = Samplers::new(vocab, cfg);
    let params = SharedModel::new(model);
    let global = (cfg.model == ModelKind::Gcewe && !categories.is_empty())
        .then(|| GlobalState::new(&params, cfg));
    let processed = AtomicU64::new(0);

    let mut report = RunReport::default();
    let mut local_all = LossStats::default();
    let mut global_all = LossStats::default();
    let mut blocks: BTreeMap<u64, LossStats> = BTreeMap::new();

    for epoch in 0..cfg.epochs {
        let results: Vec<Result<WorkerStats, TrainError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.workers)
                .map(|worker| {
                    let ctx = WorkerCtx {
                        params: &params,
                        source,
                        vocab,
                        cfg,
                        samplers: &samplers,
                        global: global.as_ref(),
                        processed: &processed,
                        total,
                    };
                    scope.spawn(move || ctx.run(epoch, worker))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let mut epoch_local = LossStats::default();
        let mut epoch_global = LossStats::default();
        for r in results {
            let stats = r?;
            epoch_local.add(stats.local);
            epoch_global.add(stats.global);
            for (b, s) in stats.blocks {
                blocks.entry(b).or_default().add(s);
            }
        }
        if !params.all_finite() {
            return Err(TrainError::NonFinite { epoch: epoch + 1 });
        }
        report.epoch_local_loss.push(epoch_local.mean());
        report.epoch_global_loss.push(epoch_global.mean());
        local_all.add(epoch_local);
        global_all.add(epoch_global);
    }

    *model = params.to_model();
    let done = processed.load(Ordering::Relaxed);
    report.tokens = done;
    report.global_steps = global.as_ref().map_or(0, GlobalState::steps);
    report.final_lr_alpha = learning_rate(cfg.alpha, done, total, cfg.epochs, cfg.lr_floor_ratio);
    report.final_lr_beta = if cfg.decay_beta {
        learning_rate(cfg.beta, done, total, cfg.epochs, cfg.lr_floor_ratio)
    } else {
        cfg.beta
    };
    report.mean_local_loss = local_all.mean();
    report.mean_global_loss = global_all.mean();
    report.loss_per_million = blocks.into_iter().map(|(b, s)| (b, s.mean())).collect();
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Clone, Copy)]
struct WorkerCtx<'a, S: ?Sized> {
    params: &'a SharedModel,
    source: &'a S,
    vocab: &'a Vocabulary,
    cfg: &'a TrainConfig,
    samplers: &'a Samplers,
    global: Option<&'a GlobalState>,
    processed: &'a AtomicU64,
    total: u64,
}

impl<S: DocumentSource + ?Sized> WorkerCtx<'_, S> {
    /// Processes documents `i` with `i % workers == worker`, in corpus order.
    fn run(self, epoch: usize, worker: usize) -> Result<WorkerStats, TrainError> {
        let cfg = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream((epoch * cfg.workers + worker) as u64);
        let mut ws = Workspace::new(cfg.dim);
        let mut stats = WorkerStats::default();
        for (i, doc) in self.source.documents()?.enumerate() {
            if i % cfg.workers != worker {
                continue;
            }
            let doc = doc?;
            if doc.is_empty() {
                continue;
            }
            let before = self.processed.fetch_add(doc.word_ids.len() as u64, Ordering::Relaxed);
            let lr_alpha = learning_rate(cfg.alpha, before, self.total, cfg.epochs, cfg.lr_floor_ratio);
            let local = train_document_local(self.params, &doc, cfg, self.samplers, &mut rng, lr_alpha, &mut ws);
            stats.local.add(local);
            stats.blocks.entry(before / 1_000_000).or_default().add(local);

            if let Some(global) = self.global {
                let lr_beta = if cfg.decay_beta {
                    learning_rate(cfg.beta, before, self.total, cfg.epochs, cfg.lr_floor_ratio)
                } else {
                    cfg.beta
                };
                let selected = select_global_words(&doc, self.vocab);
                stats.global.add(train_document_global(
                    self.params,
                    &doc,
                    &selected,
                    cfg,
                    global,
                    &mut rng,
                    lr_beta,
                    &mut ws,
                ));
            }
        }
        Ok(stats)
    }
}
