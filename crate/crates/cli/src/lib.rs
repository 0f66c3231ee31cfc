//! Command-line front end for training and evaluating category-enhanced
//! word embeddings.
//!
//! [`run`] parses an argument list, executes one subcommand and returns the
//! process exit code: 0 on success, 1 on a usage error, 2 on a data or
//! format error.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use cewe::corpus::CorpusError;
use cewe::docrep::DocRepError;
use cewe::eval::EvalError;
use cewe::{ModelError, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(CorpusError, ModelError, EvalError, DocRepError, std::io::Error);

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cewe", version, about = "Category-enhanced word embeddings (CBOW, CeWE, GCeWE)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count words and categories; writes <out>.vocab.tsv and <out>.categories.tsv.
    BuildVocab(TrainArgs),
    /// Train embeddings; writes <out>.words.*, <out>.cats.*, <out>.context.*, <out>.report.txt, <out>.config.
    Train(TrainArgs),
    /// Spearman correlation on a word-similarity dataset.
    EvalSim(SimArgs),
    /// 3CosAdd accuracy on an analogy dataset.
    EvalAnalogy(SimArgs),
    /// Train a linear classifier on document features and report held-out accuracy.
    EvalClassify(ClassifyArgs),
    /// Write document features as TSV (label, then one column per dimension).
    ExportDocvecs(ExportArgs),
    /// Nearest-neighbour queries.
    #[command(subcommand)]
    Nn(NnCommand),
}

/// Options shared by `build-vocab` and `train`. Every option can also be set
/// in the `--config` file as `name=value` (without the dashes); flags win.
#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus file
    #[arg(long)]
    pub corpus: Option<String>,
    /// Prefix of build-vocab output to reuse instead of counting the corpus
    #[arg(long)]
    pub vocab: Option<String>,
    /// Output prefix
    #[arg(long)]
    pub out: Option<String>,
    /// Embedding file format: text|binary [default: text]
    #[arg(long)]
    pub format: Option<String>,
    /// Minimum word count [default: 20]
    #[arg(long)]
    pub min_count: Option<String>,
    /// Keep at most this many categories, by document frequency [default: 100000]
    #[arg(long)]
    pub max_categories: Option<String>,
    /// Minimum documents per category [default: 2]
    #[arg(long)]
    pub min_category_docs: Option<String>,
    /// File of stop words, whitespace separated
    #[arg(long)]
    pub stopwords: Option<String>,
    /// cbow|cewe|gcewe [default: gcewe]
    #[arg(long)]
    pub model: Option<String>,
    /// Embedding dimension [default: 300]
    #[arg(long)]
    pub dim: Option<String>,
    /// Context words on each side [default: 5]
    #[arg(long)]
    pub window: Option<String>,
    /// Negative words per target [default: 20]
    #[arg(long)]
    pub negatives_words: Option<String>,
    /// Negative categories per global step [default: 20]
    #[arg(long)]
    pub negatives_categories: Option<String>,
    /// Local learning rate [default: 0.02]
    #[arg(long)]
    pub alpha: Option<String>,
    /// Global learning rate [default: 0.015]
    #[arg(long)]
    pub beta: Option<String>,
    /// Category weight in the context: reciprocal_cw or a number [default: reciprocal_cw]
    #[arg(long)]
    pub lambda_cat: Option<String>,
    /// Rank distribution parameter of the category sampler [default: 5]
    #[arg(long)]
    pub lambda_rank: Option<String>,
    /// Subsampling threshold, 0 disables [default: 0.0001]
    #[arg(long)]
    pub subsample: Option<String>,
    /// Passes over the corpus [default: 2]
    #[arg(long)]
    pub epochs: Option<String>,
    /// Training threads [default: $CEWE_WORKERS or 1]
    #[arg(long)]
    pub workers: Option<String>,
    /// Global steps between refreshes of the category ranking [default: 50000]
    #[arg(long)]
    pub refresh_interval: Option<String>,
    /// Random seed [default: 1]
    #[arg(long)]
    pub seed: Option<String>,
    /// Learning-rate floor as a fraction of the initial rate [default: 0.0001]
    #[arg(long)]
    pub lr_floor: Option<String>,
    /// Decay the global learning rate too: true|false [default: true]
    #[arg(long)]
    pub decay_beta: Option<String>,
    /// Exponent of the unigram noise distribution [default: 0.75]
    #[arg(long)]
    pub noise_power: Option<String>,
    /// Unigram table size [default: 10000000]
    #[arg(long)]
    pub table_size: Option<String>,
    /// Rejection attempts before the category sampler falls back to uniform [default: 16]
    #[arg(long)]
    pub max_attempts: Option<String>,
}

impl TrainArgs {
    /// Flags that were given, keyed as in config files.
    pub fn given(&self) -> BTreeMap<String, String> {
        let fields: [(&str, &Option<String>); 27] = [
            ("corpus", &self.corpus),
            ("vocab", &self.vocab),
            ("out", &self.out),
            ("format", &self.format),
            ("min-count", &self.min_count),
            ("max-categories", &self.max_categories),
            ("min-category-docs", &self.min_category_docs),
            ("stopwords", &self.stopwords),
            ("model", &self.model),
            ("dim", &self.dim),
            ("window", &self.window),
            ("negatives-words", &self.negatives_words),
            ("negatives-categories", &self.negatives_categories),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("lambda-cat", &self.lambda_cat),
            ("lambda-rank", &self.lambda_rank),
            ("subsample", &self.subsample),
            ("epochs", &self.epochs),
            ("workers", &self.workers),
            ("refresh-interval", &self.refresh_interval),
            ("seed", &self.seed),
            ("lr-floor", &self.lr_floor),
            ("decay-beta", &self.decay_beta),
            ("noise-power", &self.noise_power),
            ("table-size", &self.table_size),
            ("max-attempts", &self.max_attempts),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_owned(), v.clone())))
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct VectorArgs {
    /// Word vectors (.bin is read as binary, anything else as text)
    #[arg(long)]
    pub vectors: PathBuf,
    /// Override the format guessed from the extension: text|binary
    #[arg(long)]
    pub format: Option<String>,
    /// Output word vectors; with --source w_plus_wout they are added to --vectors
    #[arg(long)]
    pub context: Option<PathBuf>,
    /// w|w_plus_wout
    #[arg(long, default_value = "w")]
    pub source: String,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub vectors: VectorArgs,
    /// Dataset file
    #[arg(long)]
    pub dataset: PathBuf,
    /// Match dataset words exactly instead of lowercasing them
    #[arg(long)]
    pub no_lowercase: bool,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[command(flatten)]
    pub vectors: VectorArgs,
    /// Corpus used for document frequencies instead of the documents themselves
    #[arg(long)]
    pub idf_corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Labeled training corpus (first category is the class)
    #[arg(long)]
    pub train: PathBuf,
    /// Labeled test corpus
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Feed raw features to the classifier
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Corpus whose documents are exported
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output file (standard output if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum NnCommand {
    /// Words nearest to a word
    Word {
        #[command(flatten)]
        vectors: VectorArgs,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Words or categories nearest to a category
    Category {
        #[command(flatten)]
        vectors: VectorArgs,
        /// Category vectors
        #[arg(long)]
        categories: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// words|categories
        #[arg(long, default_value = "words")]
        target: String,
    },
}

/// Runs one command line and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let env_workers = std::env::var(config::WORKERS_ENV).ok();
    match commands::execute(cli.command, env_workers.as_deref(), &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
