//! Probabilistic, noise-resistant comparison sorting.
//!
//! Items are rated with either the Elo model or a two-player TrueSkill model.
//! A selection strategy picks the next pair to compare, the outcome updates
//! both ratings, and the current ranking can be read after every step. The
//! crate also carries instrumented classical sorts and a seeded simulation
//! harness that measures how fast each approach converges under noise.
//!
//! ```
//! use tssort::{Algorithm, ComparisonOutcome, EngineParams, SortSession};
//!
//! let truth = [3, 0, 2, 1];
//! let mut session = SortSession::new(4, Algorithm::TsSortPartnerWover, EngineParams::default())?;
//! while !session.is_finished() {
//!     let pair = session.next_pair()?;
//!     let outcome = if truth[pair.first] > truth[pair.second] {
//!         ComparisonOutcome::FirstWins
//!     } else {
//!         ComparisonOutcome::SecondWins
//!     };
//!     session.apply_outcome(pair, outcome)?;
//! }
//! assert_eq!(session.current_order(), vec![0, 2, 3, 1]);
//! # Ok::<(), tssort::Error>(())
//! ```

pub mod baseline;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod rating;
pub mod selection;
pub mod session;

pub use baseline::{run_baseline, run_baseline_with, Baseline, StepTrace, StepView};
pub use error::{Error, Result};
pub use harness::{
    derive_seed, run_cell, run_matrix, run_single, CellResult, CellStatus, ExperimentConfig,
    Manifest, MatrixReport, Method, RunTrace, RunsRule, SeedRole,
};
pub use metrics::{pad_and_aggregate, position_mse, ConvergenceCurve, CurvePoint};
pub use noise::NoisyComparator;
pub use rating::{
    conservative_score, draw_probability, elo_expected_win, elo_update, std_normal_cdf,
    std_normal_pdf, trueskill_update, ComparisonOutcome, EloParams, EloRating, GaussianRating,
    TrueSkillParams,
};
pub use selection::{
    select_max_draw_probability, select_max_partner_overlap_elo,
    select_max_partner_weighted_overlap, select_max_weighted_overlap, weighted_overlap, PairChoice,
};
pub use session::{
    default_budget, scaled_budget, Algorithm, EngineParams, HistoryEntry, RankedItem, Ratings,
    SessionSnapshot, SortSession,
};
