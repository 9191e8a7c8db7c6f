use thiserror::Error;

/// Errors produced by the rating, selection, engine and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rating: {0}")]
    InvalidRating(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),

    #[error("invalid pair ({first}, {second}) for {len} items")]
    InvalidPair {
        first: usize,
        second: usize,
        len: usize,
    },

    #[error(
        "pair ({first}, {second}) is not the pending pair ({expected_first}, {expected_second})"
    )]
    StalePair {
        first: usize,
        second: usize,
        expected_first: usize,
        expected_second: usize,
    },

    #[error("session finished after {0} comparisons")]
    SessionFinished(usize),

    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("no runs to aggregate")]
    EmptyAggregate,

    #[error("numeric degeneracy in rating update: {0}")]
    NumericDegeneracy(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
