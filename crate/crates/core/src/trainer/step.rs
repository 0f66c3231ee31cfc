//! Per-window and per-word SGD updates with negative sampling.

use rand::Rng;

use super::shared::{SharedMatrix, SharedModel};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Averaging weights used to form the composite context; the backward pass
/// scales the input gradient by the same weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextWeights {
    pub word: f64,
    pub category: f64,
}

/// `h = (1/cw) Σ W[j] + lambda_cat * (1/n_c) Σ C[i]`.
///
/// With no categories `h` is exactly the mean of the context word vectors.
pub fn composite_context(
    params: &SharedModel,
    context: &[usize],
    categories: &[usize],
    lambda_cat: f64,
    h: &mut [f64],
    row: &mut [f64],
) -> ContextWeights {
    assert!(!context.is_empty(), "context window must not be empty");
    let word = 1.0 / context.len() as f64;
    let category = if categories.is_empty() {
        0.0
    } else {
        lambda_cat / categories.len() as f64
    };
    h.fill(0.0);
    for &j in context {
        params.words.read_row(j, row);
        for (hd, r) in h.iter_mut().zip(row.iter()) {
            *hd += r;
        }
    }
    for hd in h.iter_mut() {
        *hd *= word;
    }
    for &i in categories {
        params.categories.read_row(i, row);
        for (hd, r) in h.iter_mut().zip(row.iter()) {
            *hd += category * r;
        }
    }
    ContextWeights { word, category }
}

/// Reusable buffers for one worker.
pub struct Scratch {
    pub h: Vec<f64>,
    pub e: Vec<f64>,
    pub row: Vec<f64>,
    grads: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Scratch {
            h: vec![0.0; dim],
            e: vec![0.0; dim],
            row: vec![0.0; dim],
            grads: Vec::new(),
        }
    }
}

/// One negative-sampling step against rows of `outputs`.
///
/// Positive pair: `g = σ(w'_t·h) - 1`; each negative: `g_n = σ(w'_n·h)`.
/// Adds `lr * g * w'` (pre-update output vectors) into `e` and then moves each
/// output row by `-lr * g * h`. Returns
/// `-ln σ(w'_t·h) - Σ ln σ(-w'_n·h)`.
pub fn negative_sampling_update(
    outputs: &SharedMatrix,
    h: &[f64],
    target: usize,
    negatives: &[usize],
    lr: f64,
    e: &mut [f64],
    row: &mut [f64],
    grads: &mut Vec<f64>,
) -> f64 {
    debug_assert!(!negatives.contains(&target));
    grads.clear();
    let mut loss = 0.0;
    for (k, &id) in std::iter::once(&target).chain(negatives).enumerate() {
        outputs.read_row(id, row);
        let x: f64 = row.iter().zip(h).map(|(a, b)| a * b).sum();
        let g = if k == 0 {
            loss += softplus(-x);
            sigmoid(x) - 1.0
        } else {
            loss += softplus(x);
            sigmoid(x)
        };
        let scale = lr * g;
        for (ed, r) in e.iter_mut().zip(row.iter()) {
            *ed += scale * r;
        }
        grads.push(g);
    }
    if lr != 0.0 {
        for (&id, &g) in std::iter::once(&target).chain(negatives).zip(grads.iter()) {
            outputs.add_scaled(id, -lr * g, h);
        }
    }
    loss
}

/// Local-window update: predict `target` from `context` plus the document categories.
#[allow(clippy::too_many_arguments)]
pub fn local_window_step(
    params: &SharedModel,
    context: &[usize],
    categories: &[usize],
    lambda_cat: f64,
    target: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    let Scratch { h, e, row, grads } = scratch;
    let weights = composite_context(params, context, categories, lambda_cat, h, row);
    e.fill(0.0);
    let loss = negative_sampling_update(&params.context, h, target, negatives, lr, e, row, grads);
    if lr != 0.0 {
        for &j in context {
            params.words.add_scaled(j, -weights.word, e);
        }
        if weights.category != 0.0 {
            for &i in categories {
                params.categories.add_scaled(i, -weights.category, e);
            }
        }
    }
    loss
}

/// Global update: selected word `word` predicts category `category`, with
/// category vectors in the output role.
pub fn global_step(
    params: &SharedModel,
    word: usize,
    category: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    let Scratch { h, e, row, grads } = scratch;
    params.words.read_row(word, h);
    e.fill(0.0);
    let loss = negative_sampling_update(&params.categories, h, category, negatives, lr, e, row, grads);
    if lr != 0.0 {
        params.words.add_scaled(word, -1.0, e);
    }
    loss
}

/// `initial * max(1 - processed / (epochs * total + 1), floor_ratio)`
pub fn learning_rate(
    initial: f64,
    tokens_processed: u64,
    total_tokens: u64,
    epochs: usize,
    floor_ratio: f64,
) -> f64 {
    debug_assert!(total_tokens > 0);
    let horizon = epochs as f64 * total_tokens as f64 + 1.0;
    initial * (1.0 - tokens_processed as f64 / horizon).max(floor_ratio)
}

/// Up to `k` kept positions on each side of `pos`, excluding `pos`.
pub(crate) fn window_context(kept: &[usize], pos: usize, k: usize, out: &mut Vec<usize>) {
    out.clear();
    let lo = pos.saturating_sub(k);
    let hi = (pos + k + 1).min(kept.len());
    out.extend(kept[lo..pos].iter().copied());
    out.extend(kept[pos + 1..hi].iter().copied());
}

/// Subsampled token sequence: each occurrence kept with probability `keep[w]`.
pub(crate) fn subsample<R: Rng + ?Sized>(
    words: &[usize],
    keep: Option<&[f64]>,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    match keep {
        None => out.extend_from_slice(words),
        Some(keep) => {
            for &w in words {
                let p = keep[w];
                if p >= 1.0 || rng.random::<f64>() < p {
                    out.push(w);
                }
            }
        }
    }
}
