//! Seeded ground-truth comparator with independent symmetric noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rating::ComparisonOutcome;

/// Name of the generator behind every seeded stream, recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Answers comparisons from known true values, inverting each answer
/// independently with probability `noise_level`.
///
/// Every call consumes exactly one uniform deviate, also at noise levels 0
/// and 1, so streams stay aligned across noise settings.
#[derive(Debug, Clone)]
pub struct NoisyComparator {
    true_values: Vec<f64>,
    noise_level: f64,
    seed: u64,
    rng: ChaCha8Rng,
    draws_made: u64,
}

impl NoisyComparator {
    pub fn new(true_values: Vec<f64>, noise_level: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_level) {
            return Err(Error::InvalidParameter {
                name: "noise_level",
                reason: format!("must lie in [0, 1], got {noise_level}"),
            });
        }
        let mut sorted = true_values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.iter().any(|v| !v.is_finite()) || sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter {
                name: "true_values",
                reason: "values must be finite and pairwise distinct".into(),
            });
        }
        Ok(NoisyComparator {
            true_values,
            noise_level,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws_made: 0,
        })
    }

    /// Comparator over items whose true values are the given ranks.
    pub fn from_ranks(ranks: &[usize], noise_level: f64, seed: u64) -> Result<Self> {
        Self::new(ranks.iter().map(|&r| r as f64).collect(), noise_level, seed)
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws_made(&self) -> u64 {
        self.draws_made
    }

    pub fn len(&self) -> usize {
        self.true_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_values.is_empty()
    }

    /// Compares items `a` and `b`; the greater true value wins. Never a draw.
    pub fn compare(&mut self, a: usize, b: usize) -> Result<ComparisonOutcome> {
        let len = self.true_values.len();
        if a == b || a >= len || b >= len {
            return Err(Error::InvalidPair {
                first: a,
                second: b,
                len,
            });
        }
        let truth = if self.true_values[a] > self.true_values[b] {
            ComparisonOutcome::FirstWins
        } else {
            ComparisonOutcome::SecondWins
        };
        self.draws_made += 1;
        let deviate: f64 = self.rng.random();
        Ok(if deviate < self.noise_level {
            truth.inverted()
        } else {
            truth
        })
    }

    /// "Is `a` < `b`?", possibly wrong.
    pub fn is_less(&mut self, a: usize, b: usize) -> Result<bool> {
        Ok(self.compare(a, b)? == ComparisonOutcome::SecondWins)
    }
}
