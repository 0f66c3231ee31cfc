//! Subcommand implementations.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use cewe::corpus::{
    build_vocabularies, build_vocabularies_from_docs, parse_corpus, read_category_vocab, read_vocab,
    tokenize_document, write_category_vocab, write_vocab,
};
use cewe::docrep::{classify, document_embedding, train_classifier, write_features, ClassifierConfig, DocRepError};
use cewe::eval::{
    evaluate_analogy, evaluate_similarity, nearest_categories_to_category, nearest_words_to_category,
    nearest_words_to_word, AnalogyDataset, SimilarityDataset, VectorSource,
};
use cewe::model::{embedding_paths, load_embeddings, save_embeddings};
use cewe::{
    train, CategoryVocabulary, EmbeddingFormat, Embeddings, Model, ModelConfig, RawDocument, VocabConfig,
    Vocabulary,
};

use crate::config::{resolve_config, TrainSettings};
use crate::{ClassifyArgs, CliError, Command, ExportArgs, NnCommand, SimArgs, TrainArgs, VectorArgs};

pub fn execute(cmd: Command, env_workers: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::BuildVocab(a) => build_vocab(&a, env_workers, out),
        Command::Train(a) => train_cmd(&a, env_workers, out),
        Command::EvalSim(a) => eval_sim(&a, out),
        Command::EvalAnalogy(a) => eval_analogy(&a, out),
        Command::EvalClassify(a) => eval_classify(&a, out),
        Command::ExportDocvecs(a) => export_docvecs(&a, out),
        Command::Nn(n) => nn(&n, out),
    }
}

/// `<prefix><suffix>` without treating the prefix's dots as an extension.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn vocab_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(prefix, ".vocab.tsv"), with_suffix(prefix, ".categories.tsv"))
}

fn settings(a: &TrainArgs, env_workers: Option<&str>) -> Result<(TrainSettings, PathBuf, PathBuf), CliError> {
    let s = resolve_config(a.config.as_deref(), &a.given(), env_workers)?;
    let corpus = s.corpus.clone();
    let out = s.out.clone();
    match (corpus, out) {
        (Some(c), Some(o)) => Ok((s, c, o)),
        (None, _) => Err(CliError::Usage("missing --corpus".into())),
        (_, None) => Err(CliError::Usage("missing --out".into())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn read_stopwords(path: Option<&Path>) -> Result<HashSet<String>, CliError> {
    match path {
        None => Ok(HashSet::new()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(text.split_whitespace().map(str::to_owned).collect())
        }
    }
}

fn count_vocabularies(s: &TrainSettings, corpus: &Path) -> Result<(Vocabulary, CategoryVocabulary), CliError> {
    let cfg = s.vocab_config(read_stopwords(s.stopwords.as_deref())?);
    if cfg.min_count < 1 || cfg.max_categories < 1 {
        return Err(CliError::Usage("min-count and max-categories must be at least 1".into()));
    }
    Ok(build_vocabularies(|| parse_corpus(corpus), &cfg)?)
}

fn build_vocab(a: &TrainArgs, env_workers: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    let (s, corpus, prefix) = settings(a, env_workers)?;
    let (vocab, cats) = count_vocabularies(&s, &corpus)?;
    let (vp, cp) = vocab_paths(&prefix);
    let mut w = create(&vp)?;
    write_vocab(&mut w, &vocab)?;
    w.flush()?;
    let mut w = create(&cp)?;
    write_category_vocab(&mut w, &cats)?;
    w.flush()?;
    fs::write(with_suffix(&prefix, ".vocab.config"), s.echo())?;
    writeln!(out, "words\t{}", vocab.len())?;
    writeln!(out, "categories\t{}", cats.len())?;
    writeln!(out, "documents\t{}", vocab.num_docs())?;
    writeln!(out, "tokens\t{}", vocab.total_tokens())?;
    Ok(())
}

fn train_cmd(a: &TrainArgs, env_workers: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    let (s, corpus, prefix) = settings(a, env_workers)?;
    s.train.validate()?;
    let (vocab, cats) = match &s.vocab {
        Some(p) => {
            let (vp, cp) = vocab_paths(p);
            (read_vocab(open(&vp)?)?, read_category_vocab(open(&cp)?)?)
        }
        None => count_vocabularies(&s, &corpus)?,
    };
    if vocab.is_empty() {
        return Err(CliError::Data("vocabulary is empty; lower --min-count?".into()));
    }
    let mut model = Model::init(
        ModelConfig {
            dim: s.train.dim,
            seed: s.train.seed,
        },
        vocab.len(),
        cats.len(),
    );
    let report = train(&mut model, &corpus, &vocab, &cats, &s.train)?;

    let (wp, cp) = embedding_paths(&prefix, s.format);
    save_embeddings(&wp, vocab.words(), model.words.view(), s.format)?;
    save_embeddings(&cp, cats.names(), model.categories.view(), s.format)?;
    let ctx = with_suffix(&prefix, &format!(".context.{}", s.format.extension()));
    save_embeddings(&ctx, vocab.words(), model.context.view(), s.format)?;
    fs::write(with_suffix(&prefix, ".config"), s.echo())?;

    let mut text = Vec::new();
    writeln!(text, "words={}", vocab.len())?;
    writeln!(text, "categories={}", cats.len())?;
    report.write_to(&mut text)?;
    fs::write(with_suffix(&prefix, ".report.txt"), &text)?;
    out.write_all(&text)?;
    Ok(())
}

fn parse_format(f: &Option<String>, path: &Path) -> Result<EmbeddingFormat, CliError> {
    match f {
        Some(f) => f.parse().map_err(CliError::Usage),
        None => Ok(EmbeddingFormat::from_path(path)),
    }
}

pub fn load_vectors(a: &VectorArgs) -> Result<Embeddings, CliError> {
    let source: VectorSource = a.source.parse().map_err(CliError::Usage)?;
    let words = load_embeddings(&a.vectors, parse_format(&a.format, &a.vectors)?)?;
    match source {
        VectorSource::Input => Ok(words),
        VectorSource::InputPlusOutput => {
            let path = a
                .context
                .as_ref()
                .ok_or_else(|| CliError::Usage("--source w_plus_wout needs --context".into()))?;
            let ctx = load_embeddings(path, parse_format(&a.format, path)?)?;
            if ctx.labels() != words.labels() || ctx.dim() != words.dim() {
                return Err(CliError::Data(format!(
                    "{} and {} do not cover the same words",
                    a.vectors.display(),
                    path.display()
                )));
            }
            let sum = &words.matrix() + &ctx.matrix();
            let (labels, _) = words.into_parts();
            Ok(Embeddings::new(labels, sum))
        }
    }
}

fn header(out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "metric\tvalue\tcoverage")
}

fn eval_sim(a: &SimArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let emb = load_vectors(&a.vectors)?;
    let ds = SimilarityDataset::read(open(&a.dataset)?)?;
    let r = evaluate_similarity(&emb, &ds, !a.no_lowercase)?;
    header(out)?;
    writeln!(out, "spearman\t{}\t{}", r.rho, r.used as f64 / ds.pairs.len() as f64)?;
    Ok(())
}

fn eval_analogy(a: &SimArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let emb = load_vectors(&a.vectors)?;
    let ds = AnalogyDataset::read(open(&a.dataset)?)?;
    let r = evaluate_analogy(&emb, &ds, !a.no_lowercase);
    let questions = |syntactic: bool| -> usize {
        ds.sections
            .iter()
            .filter(|s| s.syntactic == syntactic)
            .map(|s| s.questions.len())
            .sum()
    };
    header(out)?;
    for (name, tally, n) in [
        ("semantic", r.semantic, questions(false)),
        ("syntactic", r.syntactic, questions(true)),
        ("total", r.total, r.questions),
    ] {
        let coverage = if n == 0 { f64::NAN } else { tally.answered as f64 / n as f64 };
        writeln!(out, "{name}\t{}\t{coverage}", tally.accuracy())?;
    }
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Vec<RawDocument>, CliError> {
    Ok(parse_corpus(path)?.collect::<Result<Vec<_>, _>>()?)
}

/// Word vectors re-indexed by a vocabulary whose document frequencies come
/// from a given set of documents.
pub struct FeatureSpace {
    vocab: Vocabulary,
    matrix: Array2<f64>,
}

impl FeatureSpace {
    /// Tokens without a vector are dropped before document frequencies are counted.
    pub fn new(emb: &Embeddings, idf_docs: &[RawDocument]) -> Result<Self, CliError> {
        let known: Vec<RawDocument> = idf_docs
            .iter()
            .map(|r| {
                let tokens: Vec<&String> = r.tokens.iter().filter(|t| emb.id(t).is_some()).collect();
                RawDocument::new(Vec::<String>::new(), tokens)
            })
            .collect();
        let cfg = VocabConfig {
            min_count: 1,
            min_category_docs: 1,
            ..VocabConfig::default()
        };
        let (vocab, _) = build_vocabularies_from_docs(&known, &cfg)?;
        let matrix = Array2::from_shape_fn((vocab.len(), emb.dim()), |(i, d)| {
            emb.row(emb.id(vocab.word(i)).expect("filtered to known words"))[d]
        });
        Ok(FeatureSpace { vocab, matrix })
    }

    /// `None` when the document has no word with a vector.
    pub fn feature(&self, raw: &RawDocument) -> Result<Option<Vec<f64>>, CliError> {
        let doc = tokenize_document(raw, &self.vocab, &CategoryVocabulary::empty());
        match document_embedding(self.matrix.view(), &doc, &self.vocab) {
            Ok(x) => Ok(Some(x)),
            Err(DocRepError::EmptyFeature) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

fn eval_classify(a: &ClassifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let emb = load_vectors(&a.features.vectors)?;
    let train_raw = read_corpus(&a.train)?;
    let test_raw = read_corpus(&a.test)?;
    let idf_docs = match &a.features.idf_corpus {
        Some(p) => read_corpus(p)?,
        None => train_raw.iter().chain(&test_raw).cloned().collect(),
    };
    let space = FeatureSpace::new(&emb, &idf_docs)?;

    let mut classes: Vec<String> = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut labeled = 0usize;
    for raw in &train_raw {
        let Some(label) = raw.categories.first() else { continue };
        labeled += 1;
        let Some(x) = space.feature(raw)? else { continue };
        let class = match classes.iter().position(|c| c == label) {
            Some(i) => i,
            None => {
                classes.push(label.clone());
                classes.len() - 1
            }
        };
        xs.push(x);
        ys.push(class);
    }
    let train_coverage = xs.len() as f64 / labeled as f64;
    let cfg = ClassifierConfig {
        epochs: a.epochs,
        lr: a.lr,
        l2: a.l2,
        seed: a.seed,
        standardize: !a.no_standardize,
    };
    if !(cfg.lr.is_finite() && cfg.lr >= 0.0 && cfg.l2.is_finite() && cfg.l2 >= 0.0) {
        return Err(CliError::Usage("--lr and --l2 must be finite and non-negative".into()));
    }
    let clf = train_classifier(&xs, &ys, &cfg)?;
    let mut train_correct = 0usize;
    for (x, &y) in xs.iter().zip(&ys) {
        train_correct += usize::from(classify(&clf, x)? == y);
    }

    // Test documents whose class never occurs in training count as errors.
    let (mut labeled, mut evaluated, mut correct) = (0usize, 0usize, 0usize);
    for raw in &test_raw {
        let Some(label) = raw.categories.first() else { continue };
        labeled += 1;
        let Some(x) = space.feature(raw)? else { continue };
        evaluated += 1;
        correct += usize::from(classes[classify(&clf, &x)?] == *label);
    }
    if evaluated == 0 {
        return Err(CliError::Data(format!("no usable labeled documents in {}", a.test.display())));
    }
    header(out)?;
    writeln!(out, "train_accuracy\t{}\t{train_coverage}", train_correct as f64 / xs.len() as f64)?;
    writeln!(
        out,
        "accuracy\t{}\t{}",
        correct as f64 / evaluated as f64,
        evaluated as f64 / labeled as f64
    )?;
    Ok(())
}

fn export_docvecs(a: &ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let emb = load_vectors(&a.features.vectors)?;
    let raw = read_corpus(&a.corpus)?;
    let space = match &a.features.idf_corpus {
        Some(p) => FeatureSpace::new(&emb, &read_corpus(p)?)?,
        None => FeatureSpace::new(&emb, &raw)?,
    };
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for r in &raw {
        match space.feature(r)? {
            Some(x) => rows.push((r.categories.first().map_or("-", String::as_str), x)),
            None => dropped += 1,
        }
    }
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            write_features(&mut w, rows)?;
            w.flush()?;
        }
        None => write_features(out, rows)?,
    }
    if dropped > 0 {
        eprintln!("skipped {dropped} documents without known words");
    }
    Ok(())
}

fn lookup(emb: &Embeddings, name: &str, what: &str) -> Result<usize, CliError> {
    emb.id(name)
        .ok_or_else(|| CliError::Data(format!("{what} `{name}` not found")))
}

fn nn(cmd: &NnCommand, out: &mut dyn Write) -> Result<(), CliError> {
    let (labels, hits) = match cmd {
        NnCommand::Word { vectors, query, k } => {
            let emb = load_vectors(vectors)?;
            let id = lookup(&emb, query, "word")?;
            let hits = nearest_words_to_word(emb.matrix(), id, *k)?;
            (emb, hits)
        }
        NnCommand::Category {
            vectors,
            categories,
            query,
            k,
            target,
        } => {
            let cats = load_embeddings(categories, parse_format(&vectors.format, categories)?)?;
            let c = lookup(&cats, query, "category")?;
            match target.as_str() {
                "words" => {
                    let emb = load_vectors(vectors)?;
                    let hits = nearest_words_to_category(emb.matrix(), cats.matrix(), c, *k)?;
                    (emb, hits)
                }
                "categories" => {
                    let hits = nearest_categories_to_category(cats.matrix(), c, *k)?;
                    (cats, hits)
                }
                other => return Err(CliError::Usage(format!("--target must be words|categories, got `{other}`"))),
            }
        }
    };
    for (id, sim) in hits {
        writeln!(out, "{}\t{sim}", labels.label(id))?;
    }
    Ok(())
}
