//! Graded relevance of a candidate given the query's year.
//!
//! All three functions depend only on the absolute year gap and are
//! non-increasing in it; year labels are integers throughout.

use std::fmt;
use std::str::FromStr;

use crate::error::{RankError, Result};

/// Which gap-to-relevance mapping to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelevanceKind {
    /// `max(0, gamma - |dy|)`: linear decay, clipped to zero past `gamma`.
    ClippedLinear,
    /// `1 / (1 + |dy|)`.
    InverseLinear,
    /// `exp(1 / (1 + |dy|))`: punishes growing gaps exponentially harder.
    ExpInverse,
}

impl FromStr for RelevanceKind {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clipped-linear" => Ok(RelevanceKind::ClippedLinear),
            "inverse-linear" => Ok(RelevanceKind::InverseLinear),
            "exp-inverse" => Ok(RelevanceKind::ExpInverse),
            other => Err(RankError::invalid(
                "relevance",
                format!("unknown kind {other:?} (expected clipped-linear, inverse-linear, exp-inverse)"),
            )),
        }
    }
}

impl fmt::Display for RelevanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelevanceKind::ClippedLinear => "clipped-linear",
            RelevanceKind::InverseLinear => "inverse-linear",
            RelevanceKind::ExpInverse => "exp-inverse",
        };
        f.write_str(s)
    }
}

/// A relevance function plus its parameter. `gamma` only matters for
/// [`RelevanceKind::ClippedLinear`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelevanceSpec {
    kind: RelevanceKind,
    gamma: f64,
}

impl Default for RelevanceSpec {
    /// Clipped-linear with `gamma = 10`, the setting the model is trained with.
    fn default() -> Self {
        RelevanceSpec {
            kind: RelevanceKind::ClippedLinear,
            gamma: 10.0,
        }
    }
}

impl RelevanceSpec {
    pub fn new(kind: RelevanceKind, gamma: f64) -> Result<Self> {
        if kind == RelevanceKind::ClippedLinear && (!gamma.is_finite() || gamma <= 0.0) {
            return Err(RankError::invalid(
                "gamma",
                format!("must be > 0 for clipped-linear, got {gamma}"),
            ));
        }
        Ok(RelevanceSpec { kind, gamma })
    }

    pub fn clipped_linear(gamma: f64) -> Result<Self> {
        Self::new(RelevanceKind::ClippedLinear, gamma)
    }

    pub fn inverse_linear() -> Self {
        RelevanceSpec {
            kind: RelevanceKind::InverseLinear,
            gamma: 0.0,
        }
    }

    pub fn exp_inverse() -> Self {
        RelevanceSpec {
            kind: RelevanceKind::ExpInverse,
            gamma: 0.0,
        }
    }

    pub fn kind(&self) -> RelevanceKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Relevance of an item dated `y_item` to a query dated `y_query`.
    pub fn relevance(&self, y_query: i32, y_item: i32) -> f64 {
        let gap = (f64::from(y_query) - f64::from(y_item)).abs();
        match self.kind {
            RelevanceKind::ClippedLinear => (self.gamma - gap).max(0.0),
            RelevanceKind::InverseLinear => 1.0 / (1.0 + gap),
            RelevanceKind::ExpInverse => (1.0 / (1.0 + gap)).exp(),
        }
    }
}
