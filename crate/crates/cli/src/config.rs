//! Training settings resolved from `key=value` files, flags and defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cewe::{EmbeddingFormat, TrainConfig, VocabConfig};

use crate::CliError;

/// Environment variable consulted for the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "CEWE_WORKERS";

/// Every key accepted in a config file, in echo order.
pub const KEYS: &[&str] = &[
    "corpus",
    "vocab",
    "out",
    "format",
    "min-count",
    "max-categories",
    "min-category-docs",
    "stopwords",
    "model",
    "dim",
    "window",
    "negatives-words",
    "negatives-categories",
    "alpha",
    "beta",
    "lambda-cat",
    "lambda-rank",
    "subsample",
    "epochs",
    "workers",
    "refresh-interval",
    "seed",
    "lr-floor",
    "decay-beta",
    "noise-power",
    "table-size",
    "max-attempts",
];

/// Fully resolved settings for `train`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSettings {
    pub train: TrainConfig,
    pub corpus: Option<PathBuf>,
    /// Prefix of a `build-vocab` output; the vocabulary is built from the corpus otherwise.
    pub vocab: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: EmbeddingFormat,
    pub min_count: u64,
    pub max_categories: usize,
    pub min_category_docs: u64,
    pub stopwords: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let v = VocabConfig::default();
        TrainSettings {
            train: TrainConfig::default(),
            corpus: None,
            vocab: None,
            out: None,
            format: EmbeddingFormat::Text,
            min_count: v.min_count,
            max_categories: v.max_categories,
            min_category_docs: v.min_category_docs,
            stopwords: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value `{value}` for `{key}`: {e}")))
}

fn format_name(f: EmbeddingFormat) -> &'static str {
    match f {
        EmbeddingFormat::Text => "text",
        EmbeddingFormat::Binary => "binary",
    }
}

impl TrainSettings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let t = &mut self.train;
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "vocab" => self.vocab = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = parse(key, value)?,
            "min-count" => self.min_count = parse(key, value)?,
            "max-categories" => self.max_categories = parse(key, value)?,
            "min-category-docs" => self.min_category_docs = parse(key, value)?,
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "model" => t.model = parse(key, value)?,
            "dim" => t.dim = parse(key, value)?,
            "window" => t.window = parse(key, value)?,
            "negatives-words" => t.negatives_words = parse(key, value)?,
            "negatives-categories" => t.negatives_categories = parse(key, value)?,
            "alpha" => t.alpha = parse(key, value)?,
            "beta" => t.beta = parse(key, value)?,
            "lambda-cat" => t.lambda_cat = parse(key, value)?,
            "lambda-rank" => t.lambda_rank = parse(key, value)?,
            "subsample" => t.subsample_t = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "workers" => t.workers = parse(key, value)?,
            "refresh-interval" => t.refresh_interval = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "lr-floor" => t.lr_floor_ratio = parse(key, value)?,
            "decay-beta" => t.decay_beta = parse(key, value)?,
            "noise-power" => t.noise_power = parse(key, value)?,
            "table-size" => t.table_size = parse(key, value)?,
            "max-attempts" => t.max_attempts = parse(key, value)?,
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        Some(match key {
            "corpus" => return path(&self.corpus),
            "vocab" => return path(&self.vocab),
            "out" => return path(&self.out),
            "stopwords" => return path(&self.stopwords),
            "format" => format_name(self.format).to_owned(),
            "min-count" => self.min_count.to_string(),
            "max-categories" => self.max_categories.to_string(),
            "min-category-docs" => self.min_category_docs.to_string(),
            "model" => t.model.to_string(),
            "dim" => t.dim.to_string(),
            "window" => t.window.to_string(),
            "negatives-words" => t.negatives_words.to_string(),
            "negatives-categories" => t.negatives_categories.to_string(),
            "alpha" => t.alpha.to_string(),
            "beta" => t.beta.to_string(),
            "lambda-cat" => t.lambda_cat.to_string(),
            "lambda-rank" => t.lambda_rank.to_string(),
            "subsample" => t.subsample_t.to_string(),
            "epochs" => t.epochs.to_string(),
            "workers" => t.workers.to_string(),
            "refresh-interval" => t.refresh_interval.to_string(),
            "seed" => t.seed.to_string(),
            "lr-floor" => t.lr_floor_ratio.to_string(),
            "decay-beta" => t.decay_beta.to_string(),
            "noise-power" => t.noise_power.to_string(),
            "table-size" => t.table_size.to_string(),
            "max-attempts" => t.max_attempts.to_string(),
            _ => return None,
        })
    }

    /// `key=value` lines that parse back to the same settings.
    pub fn echo(&self) -> String {
        KEYS.iter()
            .filter_map(|k| self.get(k).map(|v| format!("{k}={v}\n")))
            .collect()
    }

    pub fn vocab_config(&self, stopwords: std::collections::HashSet<String>) -> VocabConfig {
        VocabConfig {
            min_count: self.min_count,
            stopwords,
            max_categories: self.max_categories,
            min_category_docs: self.min_category_docs,
        }
    }
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// underscores in keys are read as hyphens. Unknown keys and a key given
/// twice with different values are usage errors.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key=value", i + 1)));
        };
        let key = k.trim().replace('_', "-");
        let value = v.trim().to_owned();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        if let Some(prev) = out.get(&key) {
            if *prev != value {
                return Err(CliError::Usage(format!(
                    "config line {}: `{key}` set to both `{prev}` and `{value}`",
                    i + 1
                )));
            }
        }
        out.insert(key, value);
    }
    Ok(out)
}

/// Precedence: flags, then the config file, then the worker environment
/// variable (workers only), then defaults.
pub fn resolve_config(
    file: Option<&Path>,
    flags: &BTreeMap<String, String>,
    env_workers: Option<&str>,
) -> Result<TrainSettings, CliError> {
    let from_file = match file {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut s = TrainSettings::default();
    if let Some(w) = env_workers {
        if !flags.contains_key("workers") {
            s.set("workers", w)
                .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{w}`")))?;
        }
    }
    for (k, v) in from_file.iter().chain(flags) {
        s.set(k, v)?;
    }
    Ok(s)
}
