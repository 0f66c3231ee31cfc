//! Empirical sampler checks against independently computed distributions.

use cewe::sampling::{
    CategoryRankIndex, FactorDistribution, GeometricRankSampler, NegativeCategorySampler, UnigramTable,
    DEFAULT_MAX_ATTEMPTS, DEFAULT_TABLE_SIZE,
};
use ndarray::Array2;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{random_matrix, rng};

pub const DRAWS: usize = 1_000_000;

pub fn total_variation(counts: &[u64], p: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(p)
        .map(|(&c, &q)| (c as f64 / n as f64 - q).abs())
        .sum::<f64>()
}

/// Chi-square goodness of fit of table draws to `count^0.75`; returns the p-value.
pub fn unigram_chi_square(seed: u64) -> f64 {
    let counts: Vec<u64> = (0..40).map(|i| 10_000 / (i + 1) + 3).collect();
    let table = UnigramTable::new(&counts, 0.75, DEFAULT_TABLE_SIZE);
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let z: f64 = weights.iter().sum();
    let mut r = rng(seed);
    let mut observed = vec![0u64; counts.len()];
    for _ in 0..DRAWS {
        observed[table.sample(&mut r)] += 1;
    }
    let stat: f64 = observed
        .iter()
        .zip(&weights)
        .map(|(&o, &w)| {
            let e = DRAWS as f64 * w / z;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

pub fn geometric_tv(seed: u64) -> f64 {
    let (lambda, c) = (5.0, 300);
    let sampler = GeometricRankSampler::new(lambda, c);
    let w: Vec<f64> = (0..c).map(|r| (-(r as f64) / lambda).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    let mut r = rng(seed);
    let mut counts = vec![0u64; c];
    for _ in 0..DRAWS {
        counts[sampler.sample(&mut r)] += 1;
    }
    total_variation(&counts, &p)
}

/// Population standard deviation of each column.
pub fn column_sigma(m: &Array2<f64>) -> Vec<f64> {
    (0..m.ncols())
        .map(|f| {
            let col: Vec<f64> = m.column(f).to_vec();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
        })
        .collect()
}

pub fn factor_tv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let cats = random_matrix(&mut r, 50, 16, 1.0);
    let word: Vec<f64> = (0..16).map(|_| r.random_range(-1.0..1.0)).collect();
    let sigma = column_sigma(&cats);
    let w: Vec<f64> = word.iter().zip(&sigma).map(|(a, s)| a.abs() * s).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    let index = CategoryRankIndex::build(cats.view());
    let dist = FactorDistribution::new(&word, index.sigma()).unwrap();
    let mut counts = vec![0u64; 16];
    for _ in 0..DRAWS {
        counts[dist.sample(&mut r)] += 1;
    }
    total_variation(&counts, &p)
}

/// Number of draws (out of [`DRAWS`]) that hit a positive category.
pub fn positive_hits(seed: u64) -> usize {
    let mut r = rng(seed);
    let cats = random_matrix(&mut r, 8, 6, 1.0);
    let index = CategoryRankIndex::build(cats.view());
    let ranks = GeometricRankSampler::new(5.0, 8);
    let positives = [0usize, 2, 3, 7];
    let mut hits = 0;
    for i in 0..DRAWS {
        // The word changes every 1000 draws to vary factor and sign patterns.
        let word: Vec<f64> = (0..6).map(|f| ((i / 1000 + f) as f64 * 0.7).sin()).collect();
        let s = NegativeCategorySampler::new(&word, &index, &ranks, DEFAULT_MAX_ATTEMPTS);
        if positives.contains(&s.sample(&positives, &mut r)) {
            hits += 1;
        }
    }
    hits
}

/// Exact output distribution of the capped rejection sampler on a 3-category
/// instance, compared with empirical draws.
pub fn rejection_process_tv(seed: u64) -> f64 {
    let mut r = rng(seed);
    let cats = random_matrix(&mut r, 3, 4, 1.0);
    let word: [f64; 4] = [0.8, -0.5, 0.3, -0.9];
    let positive = 1usize;
    let sigma = column_sigma(&cats);
    let fw: Vec<f64> = word.iter().zip(&sigma).map(|(a, s)| a.abs() * s).collect();
    let fz: f64 = fw.iter().sum();
    let rw: Vec<f64> = (0..3).map(|k| (-(k as f64) / 5.0).exp()).collect();
    let rz: f64 = rw.iter().sum();

    // Proposal distribution: factor, then rank in the sign-reflected ordering.
    let mut q = [0.0f64; 3];
    for f in 0..4 {
        let mut ids = [0usize, 1, 2];
        ids.sort_by(|&a, &b| cats[[b, f]].partial_cmp(&cats[[a, f]]).unwrap());
        if word[f] < 0.0 {
            ids.reverse();
        }
        for (rank, &id) in ids.iter().enumerate() {
            q[id] += fw[f] / fz * rw[rank] / rz;
        }
    }
    let m = DEFAULT_MAX_ATTEMPTS as i32;
    let qp = q[positive];
    let accept_within_cap = (1.0 - qp.powi(m)) / (1.0 - qp);
    let p: Vec<f64> = (0..3)
        .map(|c| {
            if c == positive {
                0.0
            } else {
                q[c] * accept_within_cap + qp.powi(m) / 2.0
            }
        })
        .collect();

    let index = CategoryRankIndex::build(cats.view());
    let ranks = GeometricRankSampler::new(5.0, 3);
    let s = NegativeCategorySampler::new(&word, &index, &ranks, DEFAULT_MAX_ATTEMPTS);
    let mut counts = vec![0u64; 3];
    for _ in 0..DRAWS {
        counts[s.sample(&[positive], &mut r)] += 1;
    }
    total_variation(&counts, &p)
}
