//! Rating models for probabilistic sorting.
//!
//! Two models are supported:
//!
//! * **Elo**: every item carries a single score. All items share the same
//!   performance spread `beta`, and an update moves both scores by the same
//!   amount in opposite directions.
//! * **TrueSkill (two-player)**: every item carries a Gaussian belief
//!   `N(mu, sigma^2)` over its skill. An update shifts the means in
//!   proportion to the prior variance of each item and shrinks both variances.
//!
//! Items are ranked by score (Elo) or by the conservative score
//! `mu - 3 sigma` (TrueSkill).

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of one pairwise comparison, seen from the first item of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonOutcome {
    FirstWins,
    SecondWins,
    Draw,
}

impl ComparisonOutcome {
    /// The same result seen from the second item.
    pub fn inverted(self) -> Self {
        match self {
            ComparisonOutcome::FirstWins => ComparisonOutcome::SecondWins,
            ComparisonOutcome::SecondWins => ComparisonOutcome::FirstWins,
            ComparisonOutcome::Draw => ComparisonOutcome::Draw,
        }
    }

    /// `y` in the Elo update: 1 for a win, 0 for a draw, -1 for a loss.
    fn signum(self) -> f64 {
        match self {
            ComparisonOutcome::FirstWins => 1.0,
            ComparisonOutcome::SecondWins => -1.0,
            ComparisonOutcome::Draw => 0.0,
        }
    }
}

/// Gaussian skill belief of one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct GaussianRating {
    mu: f64,
    sigma: f64,
}

#[derive(Deserialize)]
struct RawGaussian {
    mu: f64,
    sigma: f64,
}

impl TryFrom<RawGaussian> for GaussianRating {
    type Error = Error;

    fn try_from(raw: RawGaussian) -> Result<Self> {
        GaussianRating::new(raw.mu, raw.sigma)
    }
}

impl GaussianRating {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidRating(format!(
                "mu and sigma must be finite (mu={mu}, sigma={sigma})"
            )));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidRating(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(GaussianRating { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Pessimistic point estimate `mu - 3 sigma`.
    pub fn conservative_score(&self) -> f64 {
        conservative_score(self)
    }
}

/// Scalar Elo score of one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawElo")]
pub struct EloRating {
    score: f64,
}

#[derive(Deserialize)]
struct RawElo {
    score: f64,
}

impl TryFrom<RawElo> for EloRating {
    type Error = Error;

    fn try_from(raw: RawElo) -> Result<Self> {
        EloRating::new(raw.score)
    }
}

impl EloRating {
    pub fn new(score: f64) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::InvalidRating(format!(
                "elo score must be finite, got {score}"
            )));
        }
        Ok(EloRating { score })
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// Parameters of the two-player TrueSkill model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueSkillParams {
    /// Performance spread around an item's skill.
    pub beta: f64,
    /// Prior mean of a fresh item.
    pub mu0: f64,
    /// Prior standard deviation of a fresh item.
    pub sigma0: f64,
    /// Draw margin on the performance difference.
    pub epsilon: f64,
}

impl Default for TrueSkillParams {
    fn default() -> Self {
        let sigma0 = 25.0 / 3.0;
        TrueSkillParams {
            beta: sigma0 / 2.0,
            mu0: 25.0,
            sigma0,
            epsilon: 0.0,
        }
    }
}

impl TrueSkillParams {
    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("sigma0", self.sigma0)?;
        finite("mu0", self.mu0)?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite and >= 0, got {}", self.epsilon),
            });
        }
        Ok(())
    }

    pub fn prior(&self) -> GaussianRating {
        GaussianRating {
            mu: self.mu0,
            sigma: self.sigma0,
        }
    }
}

/// Parameters of the linearized Elo model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    /// Step size `K` (the product `alpha * beta * sqrt(pi)`).
    pub k_factor: f64,
    /// Performance standard deviation shared by all items.
    pub beta: f64,
    pub initial_score: f64,
}

impl Default for EloParams {
    /// `K = 32`, a 200-point gap maps to a `Phi(1)` win chance, start at 1000.
    fn default() -> Self {
        EloParams {
            k_factor: 32.0,
            beta: 200.0 / SQRT_2,
            initial_score: 1000.0,
        }
    }
}

impl EloParams {
    /// Builds the parameters from the learning rate `alpha` of the model
    /// rather than from `K` directly.
    pub fn from_alpha(alpha: f64, beta: f64, initial_score: f64) -> Self {
        EloParams {
            k_factor: alpha * beta * PI.sqrt(),
            beta,
            initial_score,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("k_factor", self.k_factor)?;
        positive("beta", self.beta)?;
        finite("initial_score", self.initial_score)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

fn finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Mills ratio `Phi(-z) / phi(z)`.
///
/// Below the cutoff the ratio is taken directly; above it both terms
/// underflow together and the Laplace continued fraction is used instead.
fn mills_ratio(z: f64) -> f64 {
    const CUTOFF: f64 = 5.0;
    const TERMS: u32 = 80;
    if z < CUTOFF {
        return std_normal_cdf(-z) / std_normal_pdf(z);
    }
    let mut tail = z;
    for k in (1..=TERMS).rev() {
        tail = z + f64::from(k) / tail;
    }
    1.0 / tail
}

/// `phi(x) / Phi(x)`: mean of a standard normal truncated to `[-x, inf)`,
/// the mean correction for a decisive result.
fn v_win(x: f64) -> f64 {
    if x < -5.0 {
        1.0 / mills_ratio(-x)
    } else {
        std_normal_pdf(x) / std_normal_cdf(x)
    }
}

/// Mean and variance reduction `(v, w)` of a standard normal truncated
/// to `[lo, hi]`: `v = E[z]`, `w = 1 - Var[z]`.
fn truncated_moments(lo: f64, hi: f64) -> (f64, f64) {
    // Work with the interval reaching furthest into the left half.
    if lo > 0.0 {
        let (v, w) = truncated_moments(-hi, -lo);
        return (-v, w);
    }
    let width = hi - lo;
    if width < 1e-3 {
        // Density is nearly flat over the interval.
        let mid = 0.5 * (lo + hi);
        let shrink = width * width / 12.0;
        return (mid * (1.0 - shrink), 1.0 - shrink);
    }
    if hi > -5.0 {
        let mass = std_normal_cdf(hi) - std_normal_cdf(lo);
        let (d_lo, d_hi) = (std_normal_pdf(lo), std_normal_pdf(hi));
        let v = (d_lo - d_hi) / mass;
        let w = v * v + (hi * d_hi - lo * d_lo) / mass;
        return (v, w);
    }
    // Both ends deep in the lower tail: scale everything by phi(hi).
    let ratio = (0.5 * (hi - lo) * (hi + lo)).exp();
    let scaled_mass = mills_ratio(-hi) - ratio * mills_ratio(-lo);
    let v = (ratio - 1.0) / scaled_mass;
    let w = v * v + (hi - lo * ratio) / scaled_mass;
    (v, w)
}

/// Probability that an item rated `si` beats one rated `sj` under Elo.
pub fn elo_expected_win(si: EloRating, sj: EloRating, params: &EloParams) -> f64 {
    std_normal_cdf((si.score - sj.score) / (2.0 * params.beta * params.beta).sqrt())
}

/// Linearized Elo update. The returned pair keeps the input order and the
/// score sum is preserved.
pub fn elo_update(
    si: EloRating,
    sj: EloRating,
    outcome: ComparisonOutcome,
    params: &EloParams,
) -> (EloRating, EloRating) {
    let expected = elo_expected_win(si, sj, params);
    let delta = params.k_factor * ((outcome.signum() + 1.0) / 2.0 - expected);
    (
        EloRating {
            score: si.score + delta,
        },
        EloRating {
            score: sj.score - delta,
        },
    )
}

/// Two-player TrueSkill update without dynamics.
///
/// With `c^2 = 2 beta^2 + sigma_i^2 + sigma_j^2` and `t` the standardized
/// mean gap (winner minus loser, or `i` minus `j` for a draw), the means move
/// by `sigma_k^2 / c * v` and the variances shrink by the factor
/// `1 - sigma_k^2 / c^2 * w`, where `(v, w)` are the first two moments of the
/// truncated performance difference.
pub fn trueskill_update(
    ri: GaussianRating,
    rj: GaussianRating,
    outcome: ComparisonOutcome,
    params: &TrueSkillParams,
) -> Result<(GaussianRating, GaussianRating)> {
    let beta_sq = params.beta * params.beta;
    let (var_i, var_j) = (ri.sigma * ri.sigma, rj.sigma * rj.sigma);
    let c_sq = 2.0 * beta_sq + (var_i + var_j);
    let c = c_sq.sqrt();
    let margin = params.epsilon / c;

    // `v` is expressed for i's performance minus j's.
    let (v, w) = match outcome {
        ComparisonOutcome::FirstWins => {
            let x = (ri.mu - rj.mu) / c - margin;
            let v = v_win(x);
            (v, v * (v + x))
        }
        ComparisonOutcome::SecondWins => {
            let x = (rj.mu - ri.mu) / c - margin;
            let v = v_win(x);
            (-v, v * (v + x))
        }
        ComparisonOutcome::Draw => {
            let t = (ri.mu - rj.mu) / c;
            truncated_moments(-margin - t, margin - t)
        }
    };

    if !(v.is_finite() && w.is_finite()) {
        return Err(Error::NumericDegeneracy(format!(
            "non-finite correction (v={v}, w={w}) for {ri:?} vs {rj:?}"
        )));
    }
    let w = w.clamp(0.0, 1.0);

    let mu_i = ri.mu + var_i / c * v;
    let mu_j = rj.mu - var_j / c * v;
    let sigma_i = (var_i * (1.0 - var_i / c_sq * w)).sqrt();
    let sigma_j = (var_j * (1.0 - var_j / c_sq * w)).sqrt();
    Ok((
        GaussianRating::new(mu_i, sigma_i).map_err(|e| Error::NumericDegeneracy(e.to_string()))?,
        GaussianRating::new(mu_j, sigma_j).map_err(|e| Error::NumericDegeneracy(e.to_string()))?,
    ))
}

/// `mu - 3 sigma`.
pub fn conservative_score(r: &GaussianRating) -> f64 {
    r.mu - 3.0 * r.sigma
}

/// Probability that two items draw, TrueSkill's matchmaking quality.
pub fn draw_probability(ri: &GaussianRating, rj: &GaussianRating, beta: f64) -> f64 {
    let two_beta_sq = 2.0 * beta * beta;
    let spread = two_beta_sq + (ri.sigma * ri.sigma + rj.sigma * rj.sigma);
    let gap = ri.mu - rj.mu;
    (two_beta_sq / spread).sqrt() * (-(gap * gap) / (2.0 * spread)).exp()
}
