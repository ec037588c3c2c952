//! Seeded, portable random draws.
//!
//! Streams are ChaCha8 (`rand_chacha`), a counter-based generator whose
//! output is fixed by its seed on every platform. Each sweep cell gets its
//! own stream seeded by [`derive_cell_seed`], so cells can run in any order
//! on any number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Category, CategoryCatalog};

/// Redraw budget for the positive-truncated price normal.
pub const MAX_PRICE_REDRAWS: u32 = 1000;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream of one cell:
/// `mix64(master ^ mix64(cell_index + GOLDEN_GAMMA))`.
///
/// Every step is a bijection, so for a fixed master distinct indices always
/// give distinct seeds.
pub fn derive_cell_seed(master: u64, cell_index: u64) -> u64 {
    mix64(master ^ mix64(cell_index.wrapping_add(GOLDEN_GAMMA)))
}

/// Single-owner random stream.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Bernoulli trial; also returns the uniform that decided it so callers
    /// can reuse it against other thresholds.
    pub fn bernoulli(&mut self, p: f64) -> Result<(bool, f64)> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("p", p, "[0, 1]"));
        }
        let q = self.uniform();
        Ok((q < p, q))
    }

    pub fn sample_category(&mut self, catalog: &CategoryCatalog) -> usize {
        let q = self.uniform();
        let cumulative = catalog.cumulative();
        cumulative
            .iter()
            .position(|&edge| q < edge)
            .unwrap_or(cumulative.len() - 1)
    }

    /// Normal price, redrawn until strictly positive.
    pub fn sample_price(&mut self, category: &Category) -> Result<f64> {
        for _ in 0..=MAX_PRICE_REDRAWS {
            let price = category.price_mean + category.price_std * self.standard_normal();
            if price > 0.0 {
                return Ok(price);
            }
        }
        Err(Error::DegenerateDistribution {
            mean: category.price_mean,
            std: category.price_std,
            attempts: MAX_PRICE_REDRAWS + 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAWS: usize = 1_000_000;

    fn within_binomial(hits: usize, n: usize, p: f64) -> bool {
        let rate = hits as f64 / n as f64;
        (rate - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn seed_derivation_is_stable() {
        assert_eq!(derive_cell_seed(42, 7), derive_cell_seed(42, 7));
        assert_ne!(derive_cell_seed(42, 0), derive_cell_seed(42, 1));
        // golden value, frozen at first implementation
        assert_eq!(derive_cell_seed(42, 7), GOLDEN_42_7);
    }

    const GOLDEN_42_7: u64 = 15_379_744_662_986_335_453;

    #[test]
    fn seed_derivation_is_injective_on_sweep_range() {
        for master in [0u64, 1, 42, u64::MAX] {
            let mut seeds: Vec<u64> = (0..100_000).map(|i| derive_cell_seed(master, i)).collect();
            seeds.sort_unstable();
            seeds.dedup();
            assert_eq!(seeds.len(), 100_000);
        }
    }

    #[test]
    fn seed_derivation_avalanche() {
        let mut flips = 0u64;
        let mut trials = 0u64;
        for i in 0..2000u64 {
            let base = derive_cell_seed(12345, i);
            for bit in 0..64 {
                flips += (derive_cell_seed(12345 ^ (1 << bit), i) ^ base).count_ones() as u64;
                flips += (derive_cell_seed(12345, i ^ (1 << bit)) ^ base).count_ones() as u64;
                trials += 2;
            }
        }
        let mean = flips as f64 / trials as f64;
        assert!((mean - 32.0).abs() < 0.5, "mean flipped bits {mean}");
    }

    #[test]
    fn replay_reproduces_sequence() {
        let mut a = RandomStream::new(9);
        let mut b = RandomStream::new(9);
        let cat = CategoryCatalog::default();
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            assert_eq!(a.sample_category(&cat), b.sample_category(&cat));
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn bernoulli_extremes_and_rate() {
        let mut s = RandomStream::new(1);
        for _ in 0..10_000 {
            assert!(!s.bernoulli(0.0).unwrap().0);
            assert!(s.bernoulli(1.0).unwrap().0);
        }
        let hits = (0..DRAWS).filter(|_| s.bernoulli(0.3).unwrap().0).count();
        assert!(within_binomial(hits, DRAWS, 0.3), "{hits}");
        assert!(s.bernoulli(1.5).is_err());
        assert!(s.bernoulli(-0.1).is_err());
    }

    #[test]
    fn bernoulli_exposes_its_uniform() {
        let mut a = RandomStream::new(3);
        let mut b = RandomStream::new(3);
        let (hit, q) = a.bernoulli(0.4).unwrap();
        assert_eq!(q.to_bits(), b.uniform().to_bits());
        assert_eq!(hit, q < 0.4);
    }

    #[test]
    fn category_frequencies() {
        let mut s = RandomStream::new(2);
        let single = CategoryCatalog::new(vec![Category::new("a", 5.0, 10.0, 1.0)]).unwrap();
        assert!((0..1000).all(|_| s.sample_category(&single) == 0));

        let even = CategoryCatalog::new(vec![
            Category::new("a", 1.0, 10.0, 1.0),
            Category::new("b", 1.0, 10.0, 1.0),
        ])
        .unwrap();
        let ones = (0..DRAWS).filter(|_| s.sample_category(&even) == 1).count();
        assert!(within_binomial(ones, DRAWS, 0.5));
        assert!(within_binomial(DRAWS - ones, DRAWS, 0.5));

        let skew = CategoryCatalog::new(vec![
            Category::new("a", 1.0, 10.0, 1.0),
            Category::new("b", 3.0, 10.0, 1.0),
        ])
        .unwrap();
        let ones = (0..DRAWS).filter(|_| s.sample_category(&skew) == 1).count();
        assert!(within_binomial(ones, DRAWS, 0.75));
    }

    #[test]
    fn price_moments() {
        let mut s = RandomStream::new(5);
        let phones = Category::new("phones", 1.0, 700.0, 200.0);
        let mean = (0..DRAWS)
            .map(|_| s.sample_price(&phones).unwrap())
            .sum::<f64>()
            / DRAWS as f64;
        assert!((mean - 700.0).abs() <= 4.0 * 200.0 / 1000.0, "{mean}");

        let cases = Category::new("cases", 1.0, 29.0, 8.0);
        let draws: Vec<f64> = (0..DRAWS)
            .map(|_| s.sample_price(&cases).unwrap())
            .collect();
        assert!(draws.iter().all(|&p| p > 0.0));
        let mu = draws.iter().sum::<f64>() / DRAWS as f64;
        let var = draws.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / (DRAWS - 1) as f64;
        assert!((var.sqrt() - 8.0).abs() <= 0.1, "{}", var.sqrt());
    }

    #[test]
    fn degenerate_price_distribution_errors() {
        let mut s = RandomStream::new(5);
        let negative = Category {
            name: "neg".into(),
            weight: 1.0,
            price_mean: -1e6,
            price_std: 1.0,
        };
        assert!(matches!(
            s.sample_price(&negative),
            Err(Error::DegenerateDistribution { attempts: 1001, .. })
        ));
    }
}
