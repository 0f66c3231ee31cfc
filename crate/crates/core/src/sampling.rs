//! Stochastic selection: unigram noise table, frequent-word subsampling and
//! the adaptive factor/rank sampler for negative categories.

use ndarray::ArrayView2;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("every factor weight |w_f| * sigma_f is zero")]
    ZeroWeights,
}

/// Fixed-size table of word ids whose entry frequencies follow `count^power`.
#[derive(Clone, Debug)]
pub struct UnigramTable {
    table: Vec<u32>,
    power: f64,
    vocab_size: usize,
}

pub const DEFAULT_TABLE_SIZE: usize = 10_000_000;
pub const DEFAULT_NOISE_POWER: f64 = 0.75;

impl UnigramTable {
    /// Each word gets `round(P_k * size) - round(P_{k-1} * size)` slots, where
    /// `P_k` is the cumulative smoothed probability, so per-word error stays below
    /// one slot.
    pub fn new(counts: &[u64], power: f64, table_size: usize) -> Self {
        assert!(!counts.is_empty(), "unigram table needs at least one word");
        assert!(table_size >= counts.len(), "table_size must be >= vocabulary size");
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        let mut table = Vec::with_capacity(table_size);
        let mut cumulative = 0.0;
        let mut filled = 0usize;
        for (id, w) in weights.iter().enumerate() {
            cumulative += w;
            let end = if id + 1 == weights.len() {
                table_size
            } else {
                ((cumulative / total) * table_size as f64).round() as usize
            };
            let end = end.clamp(filled, table_size);
            table.resize(end, id as u32);
            filled = end;
        }
        UnigramTable {
            table,
            power,
            vocab_size: counts.len(),
        }
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn entries(&self) -> &[u32] {
        &self.table
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.table[rng.random_range(0..self.table.len())] as usize
    }
}

/// Draws a noise word different from `exclude`.
///
/// Rejection sampling from the table; after 64 rejections falls back to a
/// uniform draw over the other words (only reachable when `exclude` fills
/// nearly the whole table).
pub fn sample_negative_word<R: Rng + ?Sized>(
    table: &UnigramTable,
    rng: &mut R,
    exclude: usize,
) -> usize {
    debug_assert!(table.vocab_size >= 2);
    for _ in 0..64 {
        let w = table.sample(rng);
        if w != exclude {
            return w;
        }
    }
    let j = rng.random_range(0..table.vocab_size - 1);
    if j >= exclude {
        j + 1
    } else {
        j
    }
}

/// Probability of keeping one occurrence of a word with relative frequency `word_freq`.
pub fn subsample_keep_probability(word_freq: f64, t: f64) -> f64 {
    (t / word_freq).sqrt().min(1.0)
}

/// Truncated geometric distribution `p(r) ∝ exp(-r / lambda)` on `0..max_rank`.
#[derive(Clone, Copy, Debug)]
pub struct GeometricRankSampler {
    lambda: f64,
    max_rank: usize,
    ln_q: f64,
    /// `1 - q^max_rank`
    mass: f64,
}

impl GeometricRankSampler {
    pub fn new(lambda: f64, max_rank: usize) -> Self {
        assert!(lambda > 0.0, "lambda_rank must be positive");
        assert!(max_rank >= 1, "max_rank must be at least 1");
        let ln_q = -1.0 / lambda;
        let mass = -(ln_q * max_rank as f64).exp_m1();
        GeometricRankSampler {
            lambda,
            max_rank,
            ln_q,
            mass,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    pub fn pmf(&self, r: usize) -> f64 {
        if r >= self.max_rank {
            return 0.0;
        }
        let one_minus_q = -self.ln_q.exp_m1();
        (self.ln_q * r as f64).exp() * one_minus_q / self.mass
    }

    /// Inverse-CDF draw: `r = floor(ln(1 - u * mass) / ln q)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.max_rank == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let r = ((-u * self.mass).ln_1p() / self.ln_q).floor();
        (r.max(0.0) as usize).min(self.max_rank - 1)
    }
}

pub fn sample_rank<R: Rng + ?Sized>(sampler: &GeometricRankSampler, rng: &mut R) -> usize {
    sampler.sample(rng)
}

/// Per-factor orderings of the category matrix plus per-factor standard deviations.
#[derive(Clone, Debug)]
pub struct CategoryRankIndex {
    /// `order[f][r]` is the category with the r-th largest value in column f.
    order: Vec<Vec<u32>>,
    sigma: Vec<f64>,
    num_categories: usize,
    version: u64,
}

impl CategoryRankIndex {
    /// Builds the index from a `categories x dim` matrix. Version starts at 1.
    pub fn build(categories: ArrayView2<'_, f64>) -> Self {
        Self::build_with_version(categories, 1)
    }

    /// A fresh index over `categories` with the version counter incremented.
    pub fn refreshed(&self, categories: ArrayView2<'_, f64>) -> Self {
        Self::build_with_version(categories, self.version + 1)
    }

    fn build_with_version(categories: ArrayView2<'_, f64>, version: u64) -> Self {
        let (n, dim) = categories.dim();
        assert!(n >= 1 && dim >= 1, "rank index needs a non-empty matrix");
        let mut order = Vec::with_capacity(dim);
        let mut sigma = Vec::with_capacity(dim);
        for f in 0..dim {
            let col = categories.column(f);
            let mut ids: Vec<u32> = (0..n as u32).collect();
            // Descending by value, ascending id on ties.
            ids.sort_by(|&a, &b| {
                col[b as usize]
                    .total_cmp(&col[a as usize])
                    .then_with(|| a.cmp(&b))
            });
            order.push(ids);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            sigma.push(var.sqrt());
        }
        CategoryRankIndex {
            order,
            sigma,
            num_categories: n,
            version,
        }
    }

    pub fn order(&self, factor: usize) -> &[u32] {
        &self.order[factor]
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn version(&self) -> u64 {
        self.version
    }
}

/// Alias for [`CategoryRankIndex::refreshed`] that starts a new index when none exists.
pub fn refresh_rank_index(
    categories: ArrayView2<'_, f64>,
    previous: Option<&CategoryRankIndex>,
) -> CategoryRankIndex {
    match previous {
        Some(prev) => prev.refreshed(categories),
        None => CategoryRankIndex::build(categories),
    }
}

/// `p(f | w) ∝ |w_f| * sigma_f`, precomputed as a cumulative table.
#[derive(Clone, Debug)]
pub struct FactorDistribution {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl FactorDistribution {
    pub fn new(word_vec: &[f64], sigma: &[f64]) -> Result<Self, SamplerError> {
        debug_assert_eq!(word_vec.len(), sigma.len());
        let mut cumulative = Vec::with_capacity(word_vec.len());
        let mut acc = 0.0;
        let mut last_positive = None;
        for (f, (w, s)) in word_vec.iter().zip(sigma).enumerate() {
            let weight = w.abs() * s;
            if weight > 0.0 {
                last_positive = Some(f);
            }
            acc += weight;
            cumulative.push(acc);
        }
        match last_positive {
            Some(last_positive) if acc.is_finite() => Ok(FactorDistribution {
                cumulative,
                last_positive,
            }),
            _ => Err(SamplerError::ZeroWeights),
        }
    }

    pub fn probability(&self, f: usize) -> f64 {
        let total = self.cumulative[self.cumulative.len() - 1];
        let prev = if f == 0 { 0.0 } else { self.cumulative[f - 1] };
        (self.cumulative[f] - prev) / total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.last_positive)
    }
}

pub fn sample_factor<R: Rng + ?Sized>(
    word_vec: &[f64],
    index: &CategoryRankIndex,
    rng: &mut R,
) -> Result<usize, SamplerError> {
    Ok(FactorDistribution::new(word_vec, index.sigma())?.sample(rng))
}

pub const DEFAULT_MAX_ATTEMPTS: usize = 16;

/// Adaptive negative-category draws for one word vector.
///
/// Holds the factor distribution so repeated draws for the same word skip the
/// O(D) setup. Falls back to a uniform factor when every factor weight is zero.
pub struct NegativeCategorySampler<'a> {
    word_vec: &'a [f64],
    index: &'a CategoryRankIndex,
    factors: Option<FactorDistribution>,
    ranks: &'a GeometricRankSampler,
    max_attempts: usize,
}

impl<'a> NegativeCategorySampler<'a> {
    pub fn new(
        word_vec: &'a [f64],
        index: &'a CategoryRankIndex,
        ranks: &'a GeometricRankSampler,
        max_attempts: usize,
    ) -> Self {
        NegativeCategorySampler {
            word_vec,
            index,
            factors: FactorDistribution::new(word_vec, index.sigma()).ok(),
            ranks,
            max_attempts,
        }
    }

    /// One proposal from the factor/rank scheme, before positive rejection.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let f = match &self.factors {
            Some(dist) => dist.sample(rng),
            None => rng.random_range(0..self.index.dim()),
        };
        let n = self.index.num_categories();
        let r = self.ranks.sample(rng).min(n - 1);
        let order = self.index.order(f);
        let id = if self.word_vec[f] >= 0.0 {
            order[r]
        } else {
            order[n - 1 - r]
        };
        id as usize
    }

    /// Draws a category not in `positives` (sorted ascending, no duplicates).
    pub fn sample<R: Rng + ?Sized>(&self, positives: &[usize], rng: &mut R) -> usize {
        let n = self.index.num_categories();
        assert!(n > positives.len(), "no non-positive category to sample");
        debug_assert!(positives.windows(2).all(|w| w[0] < w[1]));
        for _ in 0..self.max_attempts {
            let c = self.propose(rng);
            if positives.binary_search(&c).is_err() {
                return c;
            }
        }
        uniform_excluding(n, positives, rng)
    }
}

/// Uniform draw from `0..n` minus the sorted `excluded` ids.
fn uniform_excluding<R: Rng + ?Sized>(n: usize, excluded: &[usize], rng: &mut R) -> usize {
    let mut id = rng.random_range(0..n - excluded.len());
    for &p in excluded {
        if p <= id {
            id += 1;
        } else {
            break;
        }
    }
    id
}

pub fn sample_negative_category<R: Rng + ?Sized>(
    word_vec: &[f64],
    index: &CategoryRankIndex,
    positives: &[usize],
    rank_sampler: &GeometricRankSampler,
    rng: &mut R,
) -> usize {
    NegativeCategorySampler::new(word_vec, index, rank_sampler, DEFAULT_MAX_ATTEMPTS)
        .sample(positives, rng)
}
