//! Year prediction by k-nearest neighbors over a labeled support set.
//!
//! The exact path scans the whole support; ties are broken by ascending item
//! id so results never depend on support order. Predictions are the
//! (optionally similarity-weighted) mean of the neighbors' years, rounded
//! half-up and clamped into the support's label span.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LabeledItem;
use crate::error::{RankError, Result};
use crate::ranking::{cosine_raw, Vector};

/// One support entry: an embedded, year-labeled item.
#[derive(Debug, Clone)]
pub struct SupportItem {
    pub id: u64,
    pub year: i32,
    pub embedding: Vector,
}

/// How a support set was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportSource {
    Full,
    RandomSample { n: usize, seed: u64 },
}

/// Immutable labeled collection that queries are matched against.
#[derive(Debug, Clone)]
pub struct SupportSet {
    items: Vec<SupportItem>,
    source: SupportSource,
    dim: usize,
}

impl SupportSet {
    /// Build from pre-assembled entries.
    pub fn from_parts(items: Vec<SupportItem>, source: SupportSource) -> Result<Self> {
        if items.is_empty() {
            return Err(RankError::Empty("support set"));
        }
        let dim = items[0].embedding.dim();
        for item in &items {
            if item.embedding.dim() != dim {
                return Err(RankError::DimensionMismatch {
                    left: dim,
                    right: item.embedding.dim(),
                });
            }
            if item.embedding.norm() == 0.0 {
                return Err(RankError::ZeroNorm);
            }
        }
        Ok(SupportSet { items, source, dim })
    }

    /// Build from labeled items that already carry embeddings.
    pub fn from_items(items: &[LabeledItem]) -> Result<Self> {
        let entries = items
            .iter()
            .map(|item| {
                let embedding = item
                    .embedding
                    .clone()
                    .ok_or(RankError::Empty("item embedding"))?;
                Ok(SupportItem {
                    id: item.id,
                    year: item.year,
                    embedding,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(entries, SupportSource::Full)
    }

    /// Draw a uniform random sub-support of size `n` (without replacement).
    pub fn sample(&self, n: usize, seed: u64) -> Result<SupportSet> {
        if n == 0 || n > self.items.len() {
            return Err(RankError::invalid(
                "n",
                format!("sample size must be in 1..={}, got {n}", self.items.len()),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.items.len()).collect();
        idx.shuffle(&mut rng);
        let items = idx[..n].iter().map(|&i| self.items[i].clone()).collect();
        SupportSet::from_parts(items, SupportSource::RandomSample { n, seed })
    }

    pub fn items(&self) -> &[SupportItem] {
        &self.items
    }

    pub fn source(&self) -> SupportSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// (min year, max year) over the support labels.
    pub fn year_span(&self) -> (i32, i32) {
        let min = self.items.iter().map(|i| i.year).min().unwrap();
        let max = self.items.iter().map(|i| i.year).max().unwrap();
        (min, max)
    }
}

/// A scored support item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub similarity: f64,
}

/// A predicted year with the evidence behind it.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub year: i32,
    pub neighbors: Vec<Neighbor>,
    /// `k` exceeded the support size and was clamped.
    pub k_clamped: bool,
    /// Weighted aggregation fell back to the plain mean (non-positive
    /// similarity sum).
    pub weight_fallback: bool,
}

/// Canonical result order: descending similarity, ties by ascending id.
pub(crate) fn sort_neighbors(neighbors: &mut [(u64, f64, i32)]) {
    neighbors.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
}

fn scan(query: &Vector, support: &SupportSet) -> Result<Vec<(u64, f64, i32)>> {
    if query.dim() != support.dim() {
        return Err(RankError::DimensionMismatch {
            left: query.dim(),
            right: support.dim(),
        });
    }
    let mut scored = support
        .items
        .iter()
        .map(|item| {
            let s = cosine_raw(query.as_slice(), item.embedding.as_slice())?;
            Ok((item.id, s, item.year))
        })
        .collect::<Result<Vec<_>>>()?;
    sort_neighbors(&mut scored);
    Ok(scored)
}

/// Score the entire support against `query` in canonical order.
pub fn rank_support(query: &Vector, support: &SupportSet) -> Result<Vec<Neighbor>> {
    Ok(scan(query, support)?
        .into_iter()
        .map(|(id, similarity, _)| Neighbor { id, similarity })
        .collect())
}

pub(crate) fn round_half_up(x: f64) -> i32 {
    (x + 0.5).floor() as i32
}

/// Turn the top-k scored neighbors into a year prediction.
pub(crate) fn aggregate(
    top: &[(u64, f64, i32)],
    weighted: bool,
    span: (i32, i32),
    k_clamped: bool,
) -> Prediction {
    let neighbors: Vec<Neighbor> = top
        .iter()
        .map(|&(id, similarity, _)| Neighbor { id, similarity })
        .collect();
    let plain_mean =
        top.iter().map(|&(_, _, y)| f64::from(y)).sum::<f64>() / top.len() as f64;
    let mut weight_fallback = false;
    let mean = if weighted {
        let wsum: f64 = top.iter().map(|&(_, s, _)| s).sum();
        if wsum > 0.0 {
            top.iter().map(|&(_, s, y)| s * f64::from(y)).sum::<f64>() / wsum
        } else {
            weight_fallback = true;
            plain_mean
        }
    } else {
        plain_mean
    };
    let year = round_half_up(mean).clamp(span.0, span.1);
    Prediction {
        year,
        neighbors,
        k_clamped,
        weight_fallback,
    }
}

fn predict_impl(query: &Vector, support: &SupportSet, k: usize, weighted: bool) -> Result<Prediction> {
    if k == 0 {
        return Err(RankError::invalid("k", "must be >= 1"));
    }
    let scored = scan(query, support)?;
    let k_clamped = k > scored.len();
    let k_eff = k.min(scored.len());
    Ok(aggregate(&scored[..k_eff], weighted, support.year_span(), k_clamped))
}

/// Predict the year of `query` as the rounded mean of its k most similar
/// support items' years (exact scan).
pub fn knn_predict(query: &Vector, support: &SupportSet, k: usize) -> Result<Prediction> {
    predict_impl(query, support, k, false)
}

/// Predict with neighbors weighted by their similarities (normalized by the
/// similarity sum; falls back to the plain mean when that sum is not
/// positive).
pub fn weighted_knn_predict(query: &Vector, support: &SupportSet, k: usize) -> Result<Prediction> {
    predict_impl(query, support, k, true)
}

/// MAE over `queries` for each k in `ks`.
pub fn mae_vs_k_curve(
    queries: &[LabeledItem],
    support: &SupportSet,
    ks: &[usize],
    weighted: bool,
) -> Result<Vec<(usize, f64)>> {
    if queries.is_empty() {
        return Err(RankError::Empty("queries"));
    }
    if ks.is_empty() {
        return Err(RankError::Empty("ks"));
    }
    // One scan per query, reused across every k.
    let scans = queries
        .par_iter()
        .map(|q| {
            let embedding = q.embedding.as_ref().ok_or(RankError::Empty("item embedding"))?;
            scan(embedding, support)
        })
        .collect::<Result<Vec<_>>>()?;
    let span = support.year_span();
    let mut curve = Vec::with_capacity(ks.len());
    for &k in ks {
        if k == 0 {
            return Err(RankError::invalid("k", "must be >= 1"));
        }
        let mut abs_sum = 0.0;
        for (q, scored) in queries.iter().zip(&scans) {
            let k_eff = k.min(scored.len());
            let pred = aggregate(&scored[..k_eff], weighted, span, k > scored.len());
            abs_sum += f64::from((pred.year - q.year).abs());
        }
        curve.push((k, abs_sum / queries.len() as f64));
    }
    Ok(curve)
}

/// Render a curve as CSV with header `k,mae`.
pub fn curve_to_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("k,mae\n");
    for (k, mae) in curve {
        out.push_str(&format!("{k},{mae}\n"));
    }
    out
}
