use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use super::{CorpusError, RawDocument};

/// Filtering options for vocabulary construction.
#[derive(Clone, Debug)]
pub struct VocabConfig {
    pub min_count: u64,
    pub stopwords: HashSet<String>,
    pub max_categories: usize,
    pub min_category_docs: u64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            min_count: 20,
            stopwords: HashSet::new(),
            max_categories: 100_000,
            min_category_docs: 2,
        }
    }
}

/// Word vocabulary with corpus counts and inverse document frequencies.
///
/// Ids are dense and assigned by descending count, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    doc_freq: Vec<u64>,
    idf: Vec<f64>,
    total_tokens: u64,
    num_docs: u64,
}

impl Vocabulary {
    /// Assembles a vocabulary from `(word, count, doc_freq)` entries.
    ///
    /// Entries are re-sorted into canonical id order.
    pub fn from_entries(
        mut entries: Vec<(String, u64, u64)>,
        num_docs: u64,
    ) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::Config("vocabulary is empty".into()));
        }
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut doc_freq = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (w, c, df)) in entries.into_iter().enumerate() {
            if df == 0 || df > num_docs {
                return Err(CorpusError::Config(format!(
                    "document frequency {df} of `{w}` outside 1..={num_docs}"
                )));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::Config(format!("duplicate word `{w}`")));
            }
            words.push(w);
            counts.push(c);
            doc_freq.push(df);
        }
        let idf = doc_freq
            .iter()
            .map(|&df| (num_docs as f64 / df as f64).ln())
            .collect();
        let total_tokens = counts.iter().sum();
        Ok(Vocabulary {
            words,
            index,
            counts,
            doc_freq,
            idf,
            total_tokens,
            num_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn doc_freq(&self, id: usize) -> u64 {
        self.doc_freq[id]
    }

    pub fn idf(&self, id: usize) -> f64 {
        self.idf[id]
    }

    /// Sum of counts over retained words.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Documents with at least one retained word.
    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    pub fn frequency(&self, id: usize) -> f64 {
        self.counts[id] as f64 / self.total_tokens as f64
    }
}

/// Category vocabulary, ids by descending document frequency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u64>,
}

impl CategoryVocabulary {
    pub fn from_entries(mut entries: Vec<(String, u64)>) -> Result<Self, CorpusError> {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut names = Vec::with_capacity(entries.len());
        let mut doc_freq = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (name, df)) in entries.into_iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(CorpusError::Config(format!("duplicate category `{name}`")));
            }
            names.push(name);
            doc_freq.push(df);
        }
        Ok(CategoryVocabulary {
            names,
            index,
            doc_freq,
        })
    }

    pub fn empty() -> Self {
        CategoryVocabulary {
            names: Vec::new(),
            index: HashMap::new(),
            doc_freq: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn doc_freq(&self, id: usize) -> u64 {
        self.doc_freq[id]
    }
}

/// Builds both vocabularies with two passes over a record stream.
///
/// `source` is called once per pass and must yield the same records each time.
pub fn build_vocabularies<F, I>(
    mut source: F,
    cfg: &VocabConfig,
) -> Result<(Vocabulary, CategoryVocabulary), CorpusError>
where
    F: FnMut() -> Result<I, CorpusError>,
    I: IntoIterator<Item = Result<RawDocument, CorpusError>>,
{
    if cfg.min_count < 1 {
        return Err(CorpusError::Config("min_count must be at least 1".into()));
    }
    if cfg.max_categories < 1 {
        return Err(CorpusError::Config("max_categories must be at least 1".into()));
    }

    let mut word_stats: HashMap<String, (u64, u64)> = HashMap::new();
    let mut cat_df: HashMap<String, u64> = HashMap::new();
    for doc in source()? {
        let doc = doc?;
        let mut seen: HashSet<&str> = HashSet::new();
        let mut distinct: Vec<String> = Vec::new();
        for t in &doc.tokens {
            if cfg.stopwords.contains(t) {
                continue;
            }
            if seen.insert(t.as_str()) {
                distinct.push(t.clone());
            }
        }
        for t in &doc.tokens {
            if !cfg.stopwords.contains(t) {
                word_stats.entry(t.clone()).or_default().0 += 1;
            }
        }
        for t in distinct {
            word_stats.entry(t).or_default().1 += 1;
        }
        let mut cats: Vec<&String> = doc.categories.iter().collect();
        cats.sort();
        cats.dedup();
        for c in cats {
            *cat_df.entry(c.clone()).or_default() += 1;
        }
    }

    let kept: HashSet<String> = word_stats
        .iter()
        .filter(|(_, &(count, _))| count >= cfg.min_count)
        .map(|(w, _)| w.clone())
        .collect();
    if kept.is_empty() {
        return Err(CorpusError::Config(
            "no word survives min_count and stop-word filtering".into(),
        ));
    }

    // Second pass: documents that keep at least one word.
    let mut num_docs = 0u64;
    for doc in source()? {
        let doc = doc?;
        if doc.tokens.iter().any(|t| kept.contains(t)) {
            num_docs += 1;
        }
    }

    let entries = word_stats
        .into_iter()
        .filter(|(w, _)| kept.contains(w))
        .map(|(w, (c, df))| (w, c, df))
        .collect();
    let vocab = Vocabulary::from_entries(entries, num_docs)?;

    let mut cats: Vec<(String, u64)> = cat_df
        .into_iter()
        .filter(|&(_, df)| df >= cfg.min_category_docs)
        .collect();
    cats.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    cats.truncate(cfg.max_categories);
    let categories = CategoryVocabulary::from_entries(cats)?;

    Ok((vocab, categories))
}

pub fn build_vocabularies_from_docs(
    docs: &[RawDocument],
    cfg: &VocabConfig,
) -> Result<(Vocabulary, CategoryVocabulary), CorpusError> {
    build_vocabularies(|| Ok(docs.iter().cloned().map(Ok)), cfg)
}

/// Writes `# documents=N` then one `word<TAB>count<TAB>df` line per id.
pub fn write_vocab<W: Write>(w: &mut W, vocab: &Vocabulary) -> std::io::Result<()> {
    writeln!(w, "# documents={}", vocab.num_docs)?;
    for i in 0..vocab.len() {
        writeln!(w, "{}\t{}\t{}", vocab.words[i], vocab.counts[i], vocab.doc_freq[i])?;
    }
    Ok(())
}

pub fn read_vocab<R: BufRead>(r: R) -> Result<Vocabulary, CorpusError> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, reason: &str| CorpusError::VocabFormat {
        line,
        reason: reason.to_owned(),
    };
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let header = header.map_err(|source| CorpusError::Io { line: 1, source })?;
    let num_docs: u64 = header
        .strip_prefix("# documents=")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad(1, "expected `# documents=N`"))?;
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|source| CorpusError::Io { line: i + 1, source })?;
        let mut fields = line.split('\t');
        let (Some(word), Some(count), Some(df), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad(i + 1, "expected three tab-separated fields"));
        };
        let count = count.parse().map_err(|_| bad(i + 1, "bad count"))?;
        let df = df.parse().map_err(|_| bad(i + 1, "bad document frequency"))?;
        entries.push((word.to_owned(), count, df));
    }
    Vocabulary::from_entries(entries, num_docs)
}

/// One `name<TAB>doc_freq` line per category id.
pub fn write_category_vocab<W: Write>(
    w: &mut W,
    categories: &CategoryVocabulary,
) -> std::io::Result<()> {
    for i in 0..categories.len() {
        writeln!(w, "{}\t{}", categories.names[i], categories.doc_freq[i])?;
    }
    Ok(())
}

pub fn read_category_vocab<R: BufRead>(r: R) -> Result<CategoryVocabulary, CorpusError> {
    let mut entries = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { line: i + 1, source })?;
        let (name, df) = line.rsplit_once('\t').ok_or_else(|| CorpusError::VocabFormat {
            line: i + 1,
            reason: "expected name<TAB>doc_freq".into(),
        })?;
        let df = df.parse().map_err(|_| CorpusError::VocabFormat {
            line: i + 1,
            reason: "bad document frequency".into(),
        })?;
        entries.push((name.to_owned(), df));
    }
    CategoryVocabulary::from_entries(entries)
}
