//! Shared substrate of the metrics and losses: cosine similarity, the hard
//! ranking function, and its sigmoid relaxation.
//!
//! An item's rank is one plus the number of competitors with strictly higher
//! similarity to the query. The smooth variants replace that strict comparison
//! with a temperature-controlled sigmoid so ranks (and everything built on
//! them) become differentiable.

use crate::error::{RankError, Result};

/// A finite real vector of fixed dimension.
///
/// Construction rejects empty and non-finite inputs. Zero vectors are
/// representable (via [`Vector::zeros`] or all-zero input) but rejected by
/// similarity operations, never silently scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RankError::Empty("vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RankError::NonFinite("vector entry"));
        }
        Ok(Vector(values))
    }

    /// An explicitly-constructed zero vector of dimension `dim`.
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(RankError::Empty("vector"));
        }
        Ok(Vector(vec![0.0; dim]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Sharpness of the sigmoid indicator; must be positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(RankError::invalid("tau", format!("must be > 0, got {tau}")));
        }
        Ok(Temperature(tau))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// One query's similarity scores against a candidate set that excludes the
/// query itself.
#[derive(Debug, Clone)]
pub struct SimilarityRow {
    query_index: usize,
    candidate_indices: Vec<usize>,
    scores: Vec<f64>,
}

impl SimilarityRow {
    pub fn new(query_index: usize, candidate_indices: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if candidate_indices.len() != scores.len() {
            return Err(RankError::LengthMismatch {
                left: candidate_indices.len(),
                right: scores.len(),
            });
        }
        if candidate_indices.is_empty() {
            return Err(RankError::Empty("candidate set"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(RankError::NonFinite("similarity score"));
        }
        if candidate_indices.contains(&query_index) {
            return Err(RankError::invalid(
                "candidate_indices",
                "candidate set must exclude the query itself",
            ));
        }
        let mut seen = candidate_indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(RankError::invalid("candidate_indices", "duplicate candidate"));
        }
        Ok(SimilarityRow {
            query_index,
            candidate_indices,
            scores,
        })
    }

    pub fn query_index(&self) -> usize {
        self.query_index
    }

    pub fn candidate_indices(&self) -> &[usize] {
        &self.candidate_indices
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn position_of(&self, item: usize) -> Result<usize> {
        self.candidate_indices
            .iter()
            .position(|&c| c == item)
            .ok_or(RankError::NotACandidate(item))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity without the [-1, 1] clamp; the loss gradients
/// differentiate through this exact expression.
pub(crate) fn cosine_raw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RankError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(RankError::ZeroNorm);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Cosine similarity of two non-zero vectors, clamped into [-1, 1].
///
/// Symmetric and invariant under positive rescaling of either argument.
pub fn cosine_similarity(a: &Vector, b: &Vector) -> Result<f64> {
    Ok(cosine_raw(a.as_slice(), b.as_slice())?.clamp(-1.0, 1.0))
}

/// Sigmoid relaxation of the step indicator: `1 / (1 + exp(-x / tau))`.
///
/// Monotone increasing in `x`, antisymmetric around 1/2, and saturating to
/// the hard 0/1 step as `tau` shrinks.
pub fn smooth_indicator(x: f64, tau: Temperature) -> f64 {
    1.0 / (1.0 + (-x / tau.value()).exp())
}

/// Derivative of [`smooth_indicator`] with respect to `x`.
pub fn smooth_indicator_derivative(x: f64, tau: Temperature) -> f64 {
    let g = smooth_indicator(x, tau);
    g * (1.0 - g) / tau.value()
}

/// Hard rank of `item` within its row: one plus the number of candidates with
/// strictly higher score. Tied items share the better rank.
pub fn hard_rank(item: usize, row: &SimilarityRow) -> Result<usize> {
    let pos = row.position_of(item)?;
    let s = row.scores[pos];
    let better = row
        .scores
        .iter()
        .enumerate()
        .filter(|&(j, &sj)| j != pos && sj > s)
        .count();
    Ok(1 + better)
}

/// Smooth rank of `item`: one plus the summed sigmoid of score surpluses,
/// `1 + sum_{j != i} G(s_j - s_i; tau)`.
///
/// Converges to a tie-averaged hard rank as `tau -> 0`: a competitor scoring
/// above `item` contributes 1, below contributes 0, a tie contributes 1/2.
pub fn smooth_rank(item: usize, row: &SimilarityRow, tau: Temperature) -> Result<f64> {
    let pos = row.position_of(item)?;
    let s = row.scores[pos];
    let surplus: f64 = row
        .scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != pos)
        .map(|(_, &sj)| smooth_indicator(sj - s, tau))
        .sum();
    Ok(1.0 + surplus)
}
