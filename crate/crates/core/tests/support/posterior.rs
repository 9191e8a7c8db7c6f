//! Brute-force posterior moments for the two-player update.
//!
//! The exact posterior over the two skills is the Gaussian prior times the
//! probability of the observed outcome given the skills. Its marginal means
//! and standard deviations are integrated on a dense 2-D grid, with a normal
//! CDF computed from the erf power series, so nothing here shares code with
//! the implementation under test.

#![allow(dead_code)]

use rand::Rng;
use tssort::{trueskill_update, ComparisonOutcome, GaussianRating, TrueSkillParams};

/// erf via `2/sqrt(pi) e^{-x^2} sum (2x^2)^n x / (1*3*...*(2n+1))`,
/// all terms positive.
pub fn erf_series(x: f64) -> f64 {
    if x.abs() > 6.0 {
        return x.signum();
    }
    let two_x_sq = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= two_x_sq / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
}

pub fn phi_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
}

pub struct Moments {
    pub mu_i: f64,
    pub sigma_i: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
}

pub fn posterior_moments(
    ri: (f64, f64),
    rj: (f64, f64),
    outcome: ComparisonOutcome,
    beta: f64,
    epsilon: f64,
) -> Moments {
    const POINTS: usize = 401;
    const HALF_WIDTH: f64 = 10.0;
    let perf_sd = std::f64::consts::SQRT_2 * beta;
    let likelihood = |d: f64| match outcome {
        ComparisonOutcome::FirstWins => phi_cdf((d - epsilon) / perf_sd),
        ComparisonOutcome::SecondWins => phi_cdf((-d - epsilon) / perf_sd),
        ComparisonOutcome::Draw => {
            phi_cdf((epsilon - d) / perf_sd) - phi_cdf((-epsilon - d) / perf_sd)
        }
    };
    let step = 2.0 * HALF_WIDTH / (POINTS - 1) as f64;
    let offsets: Vec<f64> = (0..POINTS).map(|k| -HALF_WIDTH + k as f64 * step).collect();
    let prior: Vec<f64> = offsets.iter().map(|z| (-0.5 * z * z).exp()).collect();

    let (mut mass, mut m_i, mut m_j, mut s_i, mut s_j) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, za) in offsets.iter().enumerate() {
        let u = za * ri.1;
        for (b, zb) in offsets.iter().enumerate() {
            let v = zb * rj.1;
            let weight = prior[a] * prior[b] * likelihood(ri.0 + u - rj.0 - v);
            mass += weight;
            m_i += weight * u;
            m_j += weight * v;
            s_i += weight * u * u;
            s_j += weight * v * v;
        }
    }
    let (m_i, m_j) = (m_i / mass, m_j / mass);
    Moments {
        mu_i: ri.0 + m_i,
        sigma_i: (s_i / mass - m_i * m_i).sqrt(),
        mu_j: rj.0 + m_j,
        sigma_j: (s_j / mass - m_j * m_j).sqrt(),
    }
}

/// Largest absolute difference between the implementation and the oracle
/// over the four posterior parameters.
pub fn max_error(
    ri: (f64, f64),
    rj: (f64, f64),
    outcome: ComparisonOutcome,
    params: &TrueSkillParams,
) -> f64 {
    let oracle = posterior_moments(ri, rj, outcome, params.beta, params.epsilon);
    let (a, b) = trueskill_update(
        GaussianRating::new(ri.0, ri.1).unwrap(),
        GaussianRating::new(rj.0, rj.1).unwrap(),
        outcome,
        params,
    )
    .unwrap();
    [
        (a.mu() - oracle.mu_i).abs(),
        (a.sigma() - oracle.sigma_i).abs(),
        (b.mu() - oracle.mu_j).abs(),
        (b.sigma() - oracle.sigma_j).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// A random rating pair, outcome and parameter set.
pub fn random_case(
    rng: &mut impl Rng,
) -> ((f64, f64), (f64, f64), ComparisonOutcome, TrueSkillParams) {
    let outcomes = [
        ComparisonOutcome::FirstWins,
        ComparisonOutcome::SecondWins,
        ComparisonOutcome::Draw,
    ];
    let outcome = outcomes[rng.random_range(0..3)];
    let beta = rng.random_range(1.0..6.0);
    // A draw needs a positive margin to have nonzero probability.
    let epsilon = match outcome {
        ComparisonOutcome::Draw => rng.random_range(0.5..3.0),
        _ if rng.random_bool(0.5) => 0.0,
        _ => rng.random_range(0.0..2.0),
    };
    let params = TrueSkillParams {
        beta,
        epsilon,
        ..Default::default()
    };
    let ri = (rng.random_range(-10.0..10.0), rng.random_range(0.5..8.0));
    let rj = (rng.random_range(-10.0..10.0), rng.random_range(0.5..8.0));
    (ri, rj, outcome, params)
}
