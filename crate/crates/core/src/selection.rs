//! Next-pair selection strategies.
//!
//! Every selector is a pure function of the current ratings. Ties are broken
//! deterministically: full-pair scans keep the lexicographically smallest
//! `(first, second)`, partner scans keep the earliest position in the ranked
//! order. Returned pairs always have `first < second`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::{conservative_score, draw_probability, EloRating, GaussianRating};

/// Two distinct item indices chosen for the next comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairChoice {
    pub first: usize,
    pub second: usize,
}

impl PairChoice {
    /// Validated pair over `len` items. Order is preserved.
    pub fn new(first: usize, second: usize, len: usize) -> Result<Self> {
        if first == second || first >= len || second >= len {
            return Err(Error::InvalidPair { first, second, len });
        }
        Ok(PairChoice { first, second })
    }

    /// The pair with the smaller index first.
    pub(crate) fn ordered(a: usize, b: usize) -> Self {
        debug_assert_ne!(a, b);
        PairChoice {
            first: a.min(b),
            second: a.max(b),
        }
    }
}

/// Weighted overlap of the two `2 sigma` intervals.
///
/// With `[a, b]` and `[c, d]` the intervals of `ri` and `rj`, the length
/// covered by both divided by the length covered by either, times the width
/// of the wider interval. Disjoint intervals give a negative value.
pub fn weighted_overlap(ri: &GaussianRating, rj: &GaussianRating) -> f64 {
    let (a, b) = (ri.mu() - 2.0 * ri.sigma(), ri.mu() + 2.0 * ri.sigma());
    let (c, d) = (rj.mu() - 2.0 * rj.sigma(), rj.mu() + 2.0 * rj.sigma());
    let shared = b.min(d) - a.max(c);
    let span = b.max(d) - a.min(c);
    shared / span * (b - a).max(d - c)
}

fn require_pairs(len: usize) -> Result<()> {
    if len < 2 {
        Err(Error::TooFewItems(len))
    } else {
        Ok(())
    }
}

/// Exhaustive argmax of `score(i, j)` over `i < j`.
pub(crate) fn argmax_all_pairs(
    len: usize,
    mut score: impl FnMut(usize, usize) -> f64,
) -> PairChoice {
    let mut best = (
        f64::NEG_INFINITY,
        PairChoice {
            first: 0,
            second: 1,
        },
    );
    for i in 0..len {
        for j in (i + 1)..len {
            let value = score(i, j);
            if value > best.0 {
                best = (
                    value,
                    PairChoice {
                        first: i,
                        second: j,
                    },
                );
            }
        }
    }
    best.1
}

/// Indices sorted by `key` descending, ties by index ascending.
pub(crate) fn ranked_indices(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    sort_ranked(&mut order, keys);
    order
}

/// Re-sorts `order` in place by `keys` descending, ties by index ascending.
/// Nearly sorted input (one update since the last call) is cheap.
pub(crate) fn sort_ranked(order: &mut [usize], keys: &[f64]) {
    order.sort_by(|&x, &y| rank_cmp(keys, x, y));
}

fn rank_cmp(keys: &[f64], x: usize, y: usize) -> Ordering {
    keys[y].total_cmp(&keys[x]).then(x.cmp(&y))
}

/// Argmax of `score(order[k], order[k + 1])` over successive positions.
pub(crate) fn argmax_successive(
    order: &[usize],
    mut score: impl FnMut(usize, usize) -> f64,
) -> PairChoice {
    let mut best = (f64::NEG_INFINITY, 0);
    for (pos, w) in order.windows(2).enumerate() {
        let value = score(w[0].min(w[1]), w[0].max(w[1]));
        if value > best.0 {
            best = (value, pos);
        }
    }
    PairChoice::ordered(order[best.1], order[best.1 + 1])
}

/// The pair with the highest draw probability among all pairs.
pub fn select_max_draw_probability(ratings: &[GaussianRating], beta: f64) -> Result<PairChoice> {
    require_pairs(ratings.len())?;
    Ok(argmax_all_pairs(ratings.len(), |i, j| {
        draw_probability(&ratings[i], &ratings[j], beta)
    }))
}

/// The pair with the highest weighted overlap among all pairs.
pub fn select_max_weighted_overlap(ratings: &[GaussianRating]) -> Result<PairChoice> {
    require_pairs(ratings.len())?;
    Ok(argmax_all_pairs(ratings.len(), |i, j| {
        weighted_overlap(&ratings[i], &ratings[j])
    }))
}

/// The neighbouring pair, in conservative-score order, with the highest
/// weighted overlap.
pub fn select_max_partner_weighted_overlap(ratings: &[GaussianRating]) -> Result<PairChoice> {
    require_pairs(ratings.len())?;
    let keys: Vec<f64> = ratings.iter().map(conservative_score).collect();
    let order = ranked_indices(&keys);
    Ok(argmax_successive(&order, |i, j| {
        weighted_overlap(&ratings[i], &ratings[j])
    }))
}

/// The neighbouring pair, in Elo score order, with the smallest score gap.
/// Equal-width intervals make this the maximum-overlap pair.
pub fn select_max_partner_overlap_elo(scores: &[EloRating]) -> Result<PairChoice> {
    require_pairs(scores.len())?;
    let keys: Vec<f64> = scores.iter().map(EloRating::score).collect();
    let order = ranked_indices(&keys);
    Ok(argmax_successive(&order, |i, j| -(keys[i] - keys[j]).abs()))
}

/// Incrementally maintained argmax of a symmetric pair score.
///
/// Each row `i` caches its best partner `j > i`. After the ratings of two
/// items change only the pairs touching them are re-scored; a row is rescanned
/// in full only when its cached best partner was one of the changed items.
/// The result always equals [`argmax_all_pairs`] on the same scores.
#[derive(Debug, Clone)]
pub(crate) struct PairArgmax {
    rows: Vec<(f64, usize)>,
}

impl PairArgmax {
    pub(crate) fn build(len: usize, mut score: impl FnMut(usize, usize) -> f64) -> Self {
        let rows = (0..len)
            .map(|i| Self::scan_row(len, i, &mut score))
            .collect();
        PairArgmax { rows }
    }

    fn scan_row(len: usize, i: usize, score: &mut impl FnMut(usize, usize) -> f64) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for j in (i + 1)..len {
            let value = score(i, j);
            if value > best.0 {
                best = (value, j);
            }
        }
        best
    }

    pub(crate) fn refresh(
        &mut self,
        changed: [usize; 2],
        mut score: impl FnMut(usize, usize) -> f64,
    ) {
        let len = self.rows.len();
        for i in 0..len {
            if changed.contains(&i) || changed.contains(&self.rows[i].1) {
                self.rows[i] = Self::scan_row(len, i, &mut score);
                continue;
            }
            for &j in &changed {
                if j > i {
                    let value = score(i, j);
                    let (best, partner) = self.rows[i];
                    if value > best || (value == best && j < partner) {
                        self.rows[i] = (value, j);
                    }
                }
            }
        }
    }

    pub(crate) fn best(&self) -> PairChoice {
        let mut best = (
            f64::NEG_INFINITY,
            PairChoice {
                first: 0,
                second: 1,
            },
        );
        for (i, &(value, j)) in self.rows.iter().enumerate() {
            if j != usize::MAX && value > best.0 {
                best = (
                    value,
                    PairChoice {
                        first: i,
                        second: j,
                    },
                );
            }
        }
        best.1
    }
}
