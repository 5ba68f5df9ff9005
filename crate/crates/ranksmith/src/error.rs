//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Everything that can go wrong across the crate.
#[derive(Debug, Error)]
pub enum RankError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero-norm vector is not a valid similarity input")]
    ZeroNorm,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("item {0} is not a candidate of this row")]
    NotACandidate(usize),

    #[error("average precision is undefined without positives")]
    NoPositives,

    #[error("relevance of a binary list must be 0/1 and consistent with the positive set")]
    NotBinary,

    #[error("ndcg is undefined for all-zero relevance")]
    ZeroRelevance,

    #[error("batch must contain at least 2 items, got {0}")]
    BatchTooSmall(usize),

    #[error("every query in the batch was skipped")]
    AllQueriesSkipped,

    #[error("unknown item id {0}")]
    UnknownItem(u64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: u64 },

    #[error("balanced split infeasible: year {year} has {available} items, {needed} needed")]
    BalancedSplitInfeasible {
        year: i32,
        available: usize,
        needed: usize,
    },

    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RankError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        RankError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RankError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        RankError::Parse {
            path: path.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, RankError>;
