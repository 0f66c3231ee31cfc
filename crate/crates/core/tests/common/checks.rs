//! One function per end-to-end acceptance check. Each returns a short
//! description of what was measured, as `Err` when the check fails.

use std::fs;
use std::path::Path;

use cewe::corpus::{build_vocabularies_from_docs, tokenize_document};
use cewe::docrep::{classify, document_embedding, train_classifier, ClassifierConfig};
use cewe::eval::{
    evaluate_analogy, nearest_categories_to_category, nearest_words_to_category, spearman, AnalogyDataset,
    AnalogySection,
};
use cewe::model::{
    embedding_paths, load_embeddings, nearest_neighbors, read_embeddings, save_embeddings, Embeddings,
    EmbeddingFormat,
};
use cewe::trainer::{global_step, local_window_step, train_documents, RunReport, Scratch, SharedModel};
use cewe::{train, CategoryVocabulary, Model, ModelConfig, ModelKind, RawDocument, TrainConfig};
use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng;

use super::grad::*;
use super::oracle::*;
use super::stats::*;
use super::{fixture_corpus, random_matrix, rng, strip_categories, topic_margin, two_topic_corpus, Fixture};

pub type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn gradient_oracle() -> Check {
    let (v, c, d) = (10, 5, 8);
    let mut r = rng(2024);
    for case in 0..50 {
        let m = random_model(&mut r, v, c, d);
        let cw = r.random_range(1..=4);
        let ctx: Vec<usize> = (0..cw).map(|_| r.random_range(0..v)).collect();
        let nc = r.random_range(0..=3);
        let mut cats = rand::seq::index::sample(&mut r, c, nc).into_vec();
        cats.sort_unstable();
        let lambda = 1.0 / cw as f64;
        let target = r.random_range(0..v);
        let neg = negatives_excluding(&mut r, v, 4, target);
        let shared = SharedModel::new(&m);
        local_window_step(&shared, &ctx, &cats, lambda, target, &neg, 1.0, &mut Scratch::new(d));
        let numeric = numeric_grad(&m, &|x| local_loss(x, &ctx, &cats, lambda, target, &neg));
        if let Some((a, n)) = gradient_mismatch(&implied_grad(&m, &shared.to_model()), &numeric) {
            return Err(format!("local case {case}: analytic {a} vs numeric {n}"));
        }

        let word = r.random_range(0..v);
        let cat = r.random_range(0..c);
        let neg = negatives_excluding(&mut r, c, 3, cat);
        let shared = SharedModel::new(&m);
        global_step(&shared, word, cat, &neg, 1.0, &mut Scratch::new(d));
        let numeric = numeric_grad(&m, &|x| global_loss(x, word, cat, &neg));
        if let Some((a, n)) = gradient_mismatch(&implied_grad(&m, &shared.to_model()), &numeric) {
            return Err(format!("global case {case}: analytic {a} vs numeric {n}"));
        }
    }
    Ok("50 local + 50 global instances within relative 1e-4".into())
}

fn fixture_cfg(model: ModelKind) -> TrainConfig {
    TrainConfig {
        model,
        dim: 16,
        window: 5,
        negatives_words: 5,
        negatives_categories: 5,
        epochs: 2,
        workers: 1,
        seed: 7,
        table_size: 1_000_000,
        ..TrainConfig::default()
    }
}

fn train_file(f: &Fixture, cfg: &TrainConfig, dir: &Path, name: &str) -> (Model, RunReport) {
    let path = f.write(dir, &format!("{name}.corpus"));
    let mut m = Model::init(
        ModelConfig {
            dim: cfg.dim,
            seed: cfg.seed,
        },
        f.vocab.len(),
        f.categories.len(),
    );
    let report = train(&mut m, &path, &f.vocab, &f.categories, cfg).expect("training");
    (m, report)
}

/// Saves words and categories in binary form and returns the file bytes.
fn saved_bytes(m: &Model, f: &Fixture, dir: &Path, name: &str) -> Vec<u8> {
    let (wp, cp) = embedding_paths(&dir.join(name), EmbeddingFormat::Binary);
    save_embeddings(&wp, f.vocab.words(), m.words.view(), EmbeddingFormat::Binary).unwrap();
    save_embeddings(&cp, f.categories.names(), m.categories.view(), EmbeddingFormat::Binary).unwrap();
    let mut out = fs::read(wp).unwrap();
    out.extend(fs::read(cp).unwrap());
    out
}

pub fn cbow_reduction() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let with = Fixture::new(fixture_corpus(7));
    let stripped = Fixture::new(strip_categories(&with.raw));
    let (cbow, _) = train_file(&with, &fixture_cfg(ModelKind::Cbow), dir.path(), "cbow");
    let (cewe, _) = train_file(&stripped, &fixture_cfg(ModelKind::Cewe), dir.path(), "cewe");
    let a = saved_bytes(
        &Model {
            categories: Array2::zeros((0, 16)),
            ..cbow.clone()
        },
        &stripped,
        dir.path(),
        "a",
    );
    let b = saved_bytes(&cewe, &stripped, dir.path(), "b");
    ensure(
        a == b && cbow.words == cewe.words && cbow.context == cewe.context,
        format!("V={}, identical word/output matrices: {}", with.vocab.len(), a == b),
    )
}

pub struct TopicRun {
    pub margin: f64,
    pub in_topic: usize,
    pub report: RunReport,
}

pub fn topic_run(kind: ModelKind) -> TopicRun {
    let t = two_topic_corpus(7);
    let f = Fixture::new(t.raw.clone());
    let cfg = TrainConfig {
        model: kind,
        dim: 16,
        window: 5,
        epochs: 5,
        seed: 7,
        subsample_t: 0.0,
        table_size: 1_000_000,
        ..TrainConfig::default()
    };
    let mut m = Model::init(ModelConfig { dim: 16, seed: 7 }, f.vocab.len(), f.categories.len());
    let report = train_documents(&mut m, &f.docs, &f.vocab, &f.categories, &cfg).expect("training");
    let margin = topic_margin(&m.words, &f.vocab, &t.topic_words);
    let mut in_topic = 0;
    for c in 0..f.categories.len() {
        let own = if f.categories.name(c) == "topicA" { &t.topic_words[0] } else { &t.topic_words[1] };
        let nn = nearest_words_to_category(m.words.view(), m.categories.view(), c, 10).unwrap();
        in_topic += nn.iter().filter(|(w, _)| own.contains(&f.vocab.word(*w).to_string())).count();
    }
    TopicRun {
        margin,
        in_topic,
        report,
    }
}

pub fn topical_clustering(cewe: &TopicRun) -> Check {
    ensure(
        cewe.margin >= 0.2 && cewe.in_topic == 20,
        format!("margin {:.3} (need >= 0.2), {}/20 category neighbours in topic", cewe.margin, cewe.in_topic),
    )
}

pub fn gcewe_effect(cewe: &TopicRun, gcewe: &TopicRun) -> Check {
    let losses = &gcewe.report.epoch_global_loss;
    let decreasing = losses.windows(2).all(|w| w[1] < w[0]);
    ensure(
        gcewe.margin >= cewe.margin - 0.02 && decreasing,
        format!(
            "margin gcewe {:.3} vs cewe {:.3}; global loss per epoch {:?}",
            gcewe.margin,
            cewe.margin,
            losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>()
        ),
    )
}

pub fn sampler_statistics() -> Check {
    let p = unigram_chi_square(11);
    let geo = geometric_tv(12);
    let factor = factor_tv(13);
    let hits = positive_hits(14);
    ensure(
        p >= 0.001 && geo <= 0.01 && factor <= 0.01 && hits == 0,
        format!("chi-square p={p:.4}, rank TV={geo:.5}, factor TV={factor:.5}, positive hits={hits}"),
    )
}

pub fn evaluation_oracles() -> Check {
    let mut r = rng(99);
    let cases = 25;
    for case in 0..cases {
        // Spearman with deliberate ties.
        let n = r.random_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0..8) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        if let Ok(rho) = spearman(&x, &y) {
            let want = brute_spearman(&x, &y);
            if (rho - want).abs() > 1e-12 {
                return Err(format!("spearman case {case}: {rho} vs {want}"));
            }
        }

        // Nearest neighbours on a random 50x8 matrix.
        let m = random_matrix(&mut r, 50, 8, 1.0);
        let q = r.random_range(0..50);
        let k = r.random_range(1..60);
        let got = nearest_neighbors(&m.row(q).to_vec(), m.view(), k, &[q]).unwrap();
        let want = brute_nearest(&m.row(q).to_vec(), &m, k, &[q]);
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-12);
        if !same {
            return Err(format!("nearest neighbours case {case} differ"));
        }

        // Analogy accuracy on 20 words, D=8, 12 questions.
        let words = random_matrix(&mut r, 20, 8, 1.0);
        let labels: Vec<String> = (0..20).map(|i| format!("t{i}")).collect();
        let mut sem = AnalogySection {
            name: "capital".into(),
            syntactic: false,
            questions: Vec::new(),
        };
        let mut syn = AnalogySection {
            name: "gram-plural".into(),
            syntactic: true,
            questions: Vec::new(),
        };
        let mut want = [0usize; 2];
        for qi in 0..12 {
            let ids = rand::seq::index::sample(&mut r, 20, 4).into_vec();
            let (a, b, c) = (ids[0], ids[1], ids[2]);
            // Half the questions use the brute-force answer so both outcomes occur.
            let d = if qi % 2 == 0 { brute_analogy(&words, a, b, c) } else { ids[3] };
            let ok = brute_analogy(&words, a, b, c) == d;
            let q = [a, b, c, d].map(|i| labels[i].clone());
            if qi % 3 == 0 {
                syn.questions.push(q);
                want[1] += usize::from(ok);
            } else {
                sem.questions.push(q);
                want[0] += usize::from(ok);
            }
        }
        let ds = AnalogyDataset {
            sections: vec![sem, syn],
        };
        let res = evaluate_analogy(&Embeddings::new(labels.clone(), words.clone()), &ds, false);
        if res.semantic.correct != want[0] || res.syntactic.correct != want[1] || res.total.answered != 12 {
            return Err(format!("analogy case {case}: {res:?} vs {want:?}"));
        }

        // Document features.
        let corpus: Vec<RawDocument> = (0..6)
            .map(|_| {
                let len = r.random_range(1..12);
                RawDocument::new(
                    ["c"],
                    (0..len).map(|_| format!("v{}", r.random_range(0..9))).collect::<Vec<_>>(),
                )
            })
            .collect();
        let (vocab, _) = build_vocabularies_from_docs(&corpus, &super::vocab_config()).unwrap();
        let rows = random_matrix(&mut r, vocab.len(), 5, 1.0);
        let row_of = |w: &str| vocab.id(w).map(|i| rows.row(i).to_vec());
        for raw in &corpus {
            let doc = tokenize_document(raw, &vocab, &CategoryVocabulary::empty());
            let got = document_embedding(rows.view(), &doc, &vocab).unwrap();
            let want = brute_doc_embedding(&corpus, raw, &row_of).unwrap();
            if got.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(format!("document feature case {case}: {got:?} vs {want:?}"));
            }
        }
    }
    Ok(format!("{cases} randomized fixtures each for spearman, neighbours, analogy, document features"))
}

/// Random orthonormal rows via Gram-Schmidt.
fn orthonormal(r: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < n {
        let mut v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        for u in &out {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n2 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n2 > 1e-6 {
            out.push(v.into_iter().map(|a| a / n2).collect());
        }
    }
    out
}

pub fn constructed_analogies() -> Check {
    let mut r = rng(5);
    let questions = 10;
    let dim = 64;
    let basis = orthonormal(&mut r, 3 * questions + 10, dim);
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut sections = vec![
        AnalogySection {
            name: "capital-common-countries".into(),
            syntactic: false,
            questions: Vec::new(),
        },
        AnalogySection {
            name: "gram3-comparative".into(),
            syntactic: true,
            questions: Vec::new(),
        },
    ];
    for q in 0..questions {
        let (a, b, c) = (&basis[3 * q], &basis[3 * q + 1], &basis[3 * q + 2]);
        let d: Vec<f64> = (0..dim).map(|k| b[k] - a[k] + c[k]).collect();
        let names = ["a", "b", "c", "d"].map(|s| format!("{s}{q}"));
        for (name, row) in names.iter().zip([a.clone(), b.clone(), c.clone(), d]) {
            labels.push(name.clone());
            rows.push(row);
        }
        sections[q % 2].questions.push(names);
    }
    for (i, v) in basis[3 * questions..].iter().enumerate() {
        labels.push(format!("noise{i}"));
        rows.push(v.clone());
    }
    let matrix = Array2::from_shape_vec((rows.len(), dim), rows.concat()).unwrap();
    let emb = Embeddings::new(labels, matrix);
    let res = evaluate_analogy(&emb, &AnalogyDataset { sections }, false);
    ensure(
        res.total.accuracy() == 1.0
            && res.semantic.answered == questions / 2
            && res.syntactic.answered == questions / 2,
        format!(
            "accuracy {} (semantic {}/{}, syntactic {}/{})",
            res.total.accuracy(),
            res.semantic.correct,
            res.semantic.answered,
            res.syntactic.correct,
            res.syntactic.answered
        ),
    )
}

pub fn serialization() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(8);
    let labels: Vec<String> = (0..40).map(|i| format!("tok{i}")).collect();
    let mut values = random_matrix(&mut r, 40, 12, 1.0);
    values.mapv_inplace(|v| v * 10f64.powi(r.random_range(-6..6)));

    // Binary stores f32; values representable in f32 survive bit for bit.
    let representable = values.mapv(|v| f64::from(v as f32));
    let bin = dir.path().join("m.bin");
    save_embeddings(&bin, &labels, representable.view(), EmbeddingFormat::Binary).unwrap();
    let loaded = load_embeddings(&bin, EmbeddingFormat::Binary).unwrap();
    let bit_exact = loaded.labels() == labels.as_slice()
        && loaded.matrix().iter().zip(representable.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    let bin2 = dir.path().join("m2.bin");
    save_embeddings(&bin2, loaded.labels(), loaded.matrix(), EmbeddingFormat::Binary).unwrap();
    let idempotent = fs::read(&bin).unwrap() == fs::read(&bin2).unwrap();

    let txt = dir.path().join("m.txt");
    save_embeddings(&txt, &labels, values.view(), EmbeddingFormat::Text).unwrap();
    let text = load_embeddings(&txt, EmbeddingFormat::Text).unwrap();
    let worst = text
        .matrix()
        .iter()
        .zip(values.iter())
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);

    // A hand-written word2vec text file with trailing spaces.
    let w2v = "3 2\nthe 0.5 -1.25 \nof 1e-3 2 \nand -0.75 0.125 \n";
    let ext = read_embeddings(w2v.as_bytes(), EmbeddingFormat::Text).unwrap();
    let interop = ext.len() == 3 && ext.dim() == 2 && ext.row(ext.id("of").unwrap()).to_vec() == vec![1e-3, 2.0];

    ensure(
        bit_exact && idempotent && worst <= 5e-7 && interop,
        format!(
            "binary bit-exact {bit_exact}, re-save identical {idempotent}, text max rel err {worst:.2e}, word2vec text {interop}"
        ),
    )
}

/// Three classes with disjoint vocabularies (plus shared filler words).
fn labeled_corpus(r: &mut impl Rng, n: usize) -> Vec<RawDocument> {
    let filler: Vec<String> = (0..10).map(|i| format!("the{i}")).collect();
    (0..n)
        .map(|i| {
            let class = i % 3;
            let own: Vec<String> = (0..30).map(|w| format!("k{class}_{w}")).collect();
            let len = r.random_range(15..40);
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    if r.random_bool(0.6) {
                        own.choose(r).unwrap().clone()
                    } else {
                        filler.choose(r).unwrap().clone()
                    }
                })
                .collect();
            RawDocument::new([format!("class{class}")], tokens)
        })
        .collect()
}

pub fn classification() -> Check {
    let mut r = rng(31);
    let train_raw = labeled_corpus(&mut r, 240);
    let test_raw = labeled_corpus(&mut r, 90);
    // Embeddings never see the labels.
    let f = Fixture::new(strip_categories(&train_raw));
    let cfg = TrainConfig {
        model: ModelKind::Cbow,
        dim: 16,
        epochs: 5,
        alpha: 0.05,
        seed: 7,
        subsample_t: 0.0,
        table_size: 1_000_000,
        ..TrainConfig::default()
    };
    let mut m = Model::init(ModelConfig { dim: 16, seed: 7 }, f.vocab.len(), f.categories.len());
    train_documents(&mut m, &f.docs, &f.vocab, &f.categories, &cfg).unwrap();

    let class_of = |raw: &RawDocument| raw.categories[0][5..].parse::<usize>().unwrap();
    let features = |raws: &[RawDocument]| -> (Vec<Vec<f64>>, Vec<usize>) {
        raws.iter()
            .map(|raw| {
                let doc = tokenize_document(raw, &f.vocab, &CategoryVocabulary::empty());
                (document_embedding(m.words.view(), &doc, &f.vocab).unwrap(), class_of(raw))
            })
            .unzip()
    };
    let (xs, ys) = features(&train_raw);
    let clf = train_classifier(&xs, &ys, &ClassifierConfig::default()).unwrap();
    let (tx, ty) = features(&test_raw);
    let correct = tx.iter().zip(&ty).filter(|(x, &y)| classify(&clf, x).unwrap() == y).count();
    let acc = correct as f64 / ty.len() as f64;
    ensure(acc >= 0.95, format!("held-out accuracy {acc:.4} on {} documents", ty.len()))
}

pub fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let f = Fixture::new(fixture_corpus(21));
    let mut out = Vec::new();
    for kind in [ModelKind::Cbow, ModelKind::Cewe, ModelKind::Gcewe] {
        let cfg = TrainConfig {
            refresh_interval: 1000,
            ..fixture_cfg(kind)
        };
        let (m1, _) = train_file(&f, &cfg, dir.path(), "one");
        let (m2, _) = train_file(&f, &cfg, dir.path(), "two");
        let same = saved_bytes(&m1, &f, dir.path(), "one") == saved_bytes(&m2, &f, dir.path(), "two")
            && m1 == m2;
        out.push((kind, same));
    }
    ensure(out.iter().all(|(_, s)| *s), format!("byte-identical reruns: {out:?}"))
}

/// Neighbour queries used by the qualitative inspection tool agree with a full scan.
pub fn category_queries_match_scan() -> Check {
    let mut r = rng(77);
    for case in 0..20 {
        let words = random_matrix(&mut r, 30, 6, 1.0);
        let cats = random_matrix(&mut r, 7, 6, 1.0);
        let c = r.random_range(0..7);
        let k = r.random_range(1..10);
        let got = nearest_words_to_category(words.view(), cats.view(), c, k).unwrap();
        let want = brute_nearest(&cats.row(c).to_vec(), &words, k, &[]);
        let got_c = nearest_categories_to_category(cats.view(), c, k).unwrap();
        let want_c = brute_nearest(&cats.row(c).to_vec(), &cats, k, &[c]);
        let ids = |v: &[(usize, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
        if ids(&got) != ids(&want) || ids(&got_c) != ids(&want_c) {
            return Err(format!("case {case}"));
        }
    }
    Ok("20 random fixtures".into())
}
