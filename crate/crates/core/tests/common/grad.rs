//! Finite-difference gradient oracle for the negative-sampling losses.

use cewe::Model;
use ndarray::Array2;
use rand::Rng;

use super::random_matrix;

pub fn sp(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn local_loss(m: &Model, ctx: &[usize], cats: &[usize], lambda: f64, target: usize, neg: &[usize]) -> f64 {
    let d = m.dim();
    let mut h = vec![0.0; d];
    for &j in ctx {
        for k in 0..d {
            h[k] += m.words[[j, k]] / ctx.len() as f64;
        }
    }
    for &i in cats {
        for k in 0..d {
            h[k] += lambda * m.categories[[i, k]] / cats.len() as f64;
        }
    }
    let mut loss = sp(-dotv(m.context.row(target).as_slice().unwrap(), &h));
    for &n in neg {
        loss += sp(dotv(m.context.row(n).as_slice().unwrap(), &h));
    }
    loss
}

pub fn global_loss(m: &Model, word: usize, cat: usize, neg: &[usize]) -> f64 {
    let h = m.words.row(word).to_vec();
    let mut loss = sp(-dotv(m.categories.row(cat).as_slice().unwrap(), &h));
    for &n in neg {
        loss += sp(dotv(m.categories.row(n).as_slice().unwrap(), &h));
    }
    loss
}

fn entry(m: &mut Model, which: usize, r: usize, c: usize) -> &mut f64 {
    match which {
        0 => &mut m.words[[r, c]],
        1 => &mut m.context[[r, c]],
        _ => &mut m.categories[[r, c]],
    }
}

/// Central differences of `f` with respect to every entry of all three matrices.
pub fn numeric_grad(m: &Model, f: &dyn Fn(&Model) -> f64) -> Model {
    const STEP: f64 = 1e-5;
    let mut g = Model {
        words: Array2::zeros(m.words.dim()),
        context: Array2::zeros(m.context.dim()),
        categories: Array2::zeros(m.categories.dim()),
    };
    for which in 0..3 {
        let shape = [&m.words, &m.context, &m.categories][which].dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let mut p = m.clone();
                let mut q = m.clone();
                *entry(&mut p, which, r, c) += STEP;
                *entry(&mut q, which, r, c) -= STEP;
                *entry(&mut g, which, r, c) = (f(&p) - f(&q)) / (2.0 * STEP);
            }
        }
    }
    g
}

/// Gradient implied by one update at lr = 1: `before - after`.
pub fn implied_grad(before: &Model, after: &Model) -> Model {
    Model {
        words: &before.words - &after.words,
        context: &before.context - &after.context,
        categories: &before.categories - &after.categories,
    }
}

/// First entry where analytic and numeric disagree beyond relative 1e-4
/// (with a 1e-8 absolute floor for entries that are ~0).
pub fn gradient_mismatch(analytic: &Model, numeric: &Model) -> Option<(f64, f64)> {
    let pairs = [
        (&analytic.words, &numeric.words),
        (&analytic.context, &numeric.context),
        (&analytic.categories, &numeric.categories),
    ];
    for (a, n) in pairs {
        for (&x, &y) in a.iter().zip(n.iter()) {
            if (x - y).abs() > 1e-4 * x.abs().max(y.abs()) + 1e-8 {
                return Some((x, y));
            }
        }
    }
    None
}

pub fn random_model(r: &mut impl Rng, v: usize, c: usize, d: usize) -> Model {
    Model {
        words: random_matrix(r, v, d, 1.0),
        context: random_matrix(r, v, d, 1.0),
        categories: random_matrix(r, c, d, 1.0),
    }
}

pub fn negatives_excluding(r: &mut impl Rng, n: usize, count: usize, target: usize) -> Vec<usize> {
    (0..count)
        .map(|_| loop {
            let x = r.random_range(0..n);
            if x != target {
                break x;
            }
        })
        .collect()
}

