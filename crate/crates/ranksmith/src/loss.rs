//! Differentiable ranking objectives: smooth-AP and smooth-nDCG.
//!
//! Both losses treat every batch item as a query against the other `B - 1`
//! items. Hard rank comparisons are relaxed with the sigmoid indicator
//! `G(s_j - s_i; tau)`, so each objective is a smooth function of the
//! pairwise cosine similarities, and through them of the raw embeddings.
//! Gradients are exact analytical derivatives of that composition; the
//! accompanying tests pin them against central finite differences.
//!
//! The ideal-DCG normalizer is always the hard sorted form: it depends only
//! on ground-truth years, is constant with respect to embeddings, and keeps
//! a perfect smooth nDCG of 1 attainable.

use rayon::prelude::*;

use crate::error::{RankError, Result};
use crate::ranking::{cosine_raw, smooth_indicator, smooth_indicator_derivative, Temperature, Vector};
use crate::relevance::RelevanceSpec;

/// Which smooth objective to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    SmoothAp,
    SmoothNdcg,
}

/// Objective selection plus its parameters.
#[derive(Debug, Clone)]
pub struct LossConfig {
    pub objective: Objective,
    pub tau: Temperature,
    /// Graded relevance for smooth-nDCG.
    pub relevance: RelevanceSpec,
    /// Year-gap threshold defining a query's positive set for smooth-AP;
    /// 0 means exact-year matches only.
    pub positive_gap: i32,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            objective: Objective::SmoothNdcg,
            tau: Temperature::new(0.01).expect("positive"),
            relevance: RelevanceSpec::default(),
            positive_gap: 0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.positive_gap < 0 {
            return Err(RankError::invalid(
                "positive_gap",
                format!("must be >= 0, got {}", self.positive_gap),
            ));
        }
        Ok(())
    }
}

/// Loss value and gradient for one batch.
#[derive(Debug, Clone)]
pub struct BatchLossResult {
    /// `1 - mean` of the per-query smooth metric, in [0, 1].
    pub loss: f64,
    /// Per-query loss `1 - value`; `None` for skipped queries (no positives
    /// or zero total relevance), which contribute nothing to loss or grad.
    pub per_query: Vec<Option<f64>>,
    /// d loss / d embedding, same shape as the input embeddings.
    pub gradient: Vec<Vec<f64>>,
    /// Number of skipped queries.
    pub skipped: usize,
}

/// Raw (unclamped) pairwise cosine similarity matrix of a batch.
pub fn batch_similarities(embeddings: &[Vector]) -> Result<Vec<Vec<f64>>> {
    let b = embeddings.len();
    let dim = embeddings[0].dim();
    for e in embeddings {
        if e.dim() != dim {
            return Err(RankError::DimensionMismatch {
                left: dim,
                right: e.dim(),
            });
        }
        if e.norm() == 0.0 {
            return Err(RankError::ZeroNorm);
        }
    }
    let mut sims = vec![vec![0.0; b]; b];
    for q in 0..b {
        sims[q][q] = 1.0;
        for i in (q + 1)..b {
            let s = cosine_raw(embeddings[q].as_slice(), embeddings[i].as_slice())?;
            sims[q][i] = s;
            sims[i][q] = s;
        }
    }
    Ok(sims)
}

/// Smooth AP of one query given candidate scores and the positive mask.
pub fn smooth_ap_from_scores(scores: &[f64], positive: &[bool], tau: Temperature) -> Result<f64> {
    check_scores(scores, positive.len())?;
    match ap_value_grad(scores, positive, tau, false) {
        Some((value, _)) => Ok(value),
        None => Err(RankError::NoPositives),
    }
}

/// Smooth nDCG of one query given candidate scores and relevance grades,
/// normalized by the hard ideal DCG of the same grades.
pub fn smooth_ndcg_from_scores(
    scores: &[f64],
    relevance: &[f64],
    tau: Temperature,
) -> Result<f64> {
    check_scores(scores, relevance.len())?;
    if relevance.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(RankError::NonFinite("relevance grade"));
    }
    match ndcg_value_grad(scores, relevance, tau, false) {
        Some((value, _)) => Ok(value),
        None => Err(RankError::ZeroRelevance),
    }
}

/// Smooth-AP batch loss (every item as query) with its gradient.
pub fn smooth_ap_batch(
    embeddings: &[Vector],
    years: &[i32],
    cfg: &LossConfig,
) -> Result<BatchLossResult> {
    batch_loss_impl(embeddings, years, cfg, Objective::SmoothAp)
}

/// Smooth-nDCG batch loss (every item as query) with its gradient.
pub fn smooth_ndcg_batch(
    embeddings: &[Vector],
    years: &[i32],
    cfg: &LossConfig,
) -> Result<BatchLossResult> {
    batch_loss_impl(embeddings, years, cfg, Objective::SmoothNdcg)
}

/// Dispatch on `cfg.objective`.
pub fn batch_loss(embeddings: &[Vector], years: &[i32], cfg: &LossConfig) -> Result<BatchLossResult> {
    batch_loss_impl(embeddings, years, cfg, cfg.objective)
}

/// Mean exact nDCG over batch queries at the current embeddings, plus the
/// number of zero-relevance queries skipped. The non-smooth counterpart the
/// smooth loss approaches as `tau -> 0`.
pub fn exact_batch_ndcg(
    embeddings: &[Vector],
    years: &[i32],
    relevance: &RelevanceSpec,
) -> Result<(f64, usize)> {
    if embeddings.len() < 2 {
        return Err(RankError::BatchTooSmall(embeddings.len()));
    }
    if embeddings.len() != years.len() {
        return Err(RankError::LengthMismatch {
            left: embeddings.len(),
            right: years.len(),
        });
    }
    let sims = batch_similarities(embeddings)?;
    let b = embeddings.len();
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for q in 0..b {
        let mut order: Vec<usize> = (0..b).filter(|&i| i != q).collect();
        order.sort_by(|&i, &j| {
            sims[q][j]
                .partial_cmp(&sims[q][i])
                .unwrap()
                .then(i.cmp(&j))
        });
        let rels: Vec<f64> = order
            .iter()
            .map(|&i| relevance.relevance(years[q], years[i]))
            .collect();
        match hard_ndcg(&rels) {
            Some(v) => {
                sum += v;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(RankError::AllQueriesSkipped);
    }
    Ok((sum / used as f64, skipped))
}

fn check_scores(scores: &[f64], other_len: usize) -> Result<()> {
    if scores.is_empty() {
        return Err(RankError::Empty("scores"));
    }
    if scores.len() != other_len {
        return Err(RankError::LengthMismatch {
            left: scores.len(),
            right: other_len,
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(RankError::NonFinite("score"));
    }
    Ok(())
}

fn hard_ndcg(rels_in_order: &[f64]) -> Option<f64> {
    let discount = |n: usize| ((n + 2) as f64).log2();
    let d: f64 = rels_in_order
        .iter()
        .enumerate()
        .map(|(n, r)| r / discount(n))
        .sum();
    let mut sorted = rels_in_order.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let i: f64 = sorted.iter().enumerate().map(|(n, r)| r / discount(n)).sum();
    if i == 0.0 {
        None
    } else {
        Some(d / i)
    }
}

/// Smooth AP of a candidate list; returns `None` when no candidate is
/// positive. Gradient is with respect to the candidate scores.
fn ap_value_grad(
    scores: &[f64],
    positive: &[bool],
    tau: Temperature,
    want_grad: bool,
) -> Option<(f64, Option<Vec<f64>>)> {
    let n = scores.len();
    let pos_idx: Vec<usize> = (0..n).filter(|&i| positive[i]).collect();
    if pos_idx.is_empty() {
        return None;
    }
    let inv_p = 1.0 / pos_idx.len() as f64;

    // numerator: smooth rank within positives; denominator: within all.
    let mut num = vec![1.0; pos_idx.len()];
    let mut den = vec![1.0; pos_idx.len()];
    for (pi, &i) in pos_idx.iter().enumerate() {
        let si = scores[i];
        for (j, &sj) in scores.iter().enumerate() {
            if j == i {
                continue;
            }
            let g = smooth_indicator(sj - si, tau);
            den[pi] += g;
            if positive[j] {
                num[pi] += g;
            }
        }
    }

    let value = pos_idx
        .iter()
        .enumerate()
        .map(|(pi, _)| num[pi] / den[pi])
        .sum::<f64>()
        * inv_p;

    if !want_grad {
        return Some((value, None));
    }

    let mut grad = vec![0.0; n];
    for (pi, &i) in pos_idx.iter().enumerate() {
        let si = scores[i];
        let c_den = -inv_p * num[pi] / (den[pi] * den[pi]);
        let c_num = inv_p / den[pi];
        for (j, &sj) in scores.iter().enumerate() {
            if j == i {
                continue;
            }
            let w = smooth_indicator_derivative(sj - si, tau);
            let f = if positive[j] { c_num + c_den } else { c_den };
            grad[j] += f * w;
            grad[i] -= f * w;
        }
    }
    Some((value, Some(grad)))
}

/// Smooth nDCG of a candidate list; returns `None` when total relevance is
/// zero. Gradient is with respect to the candidate scores.
fn ndcg_value_grad(
    scores: &[f64],
    relevance: &[f64],
    tau: Temperature,
    want_grad: bool,
) -> Option<(f64, Option<Vec<f64>>)> {
    let n = scores.len();
    if relevance.iter().all(|&r| r == 0.0) {
        return None;
    }
    let discount = |k: usize| ((k + 2) as f64).log2();
    let mut sorted = relevance.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let idcg: f64 = sorted.iter().enumerate().map(|(k, r)| r / discount(k)).sum();

    // log2 argument per relevant item: 2 + sum_j G(s_j - s_i).
    let relevant: Vec<usize> = (0..n).filter(|&i| relevance[i] > 0.0).collect();
    let mut log_arg = vec![0.0; relevant.len()];
    let mut sdcg = 0.0;
    for (ri, &i) in relevant.iter().enumerate() {
        let si = scores[i];
        let mut arg = 2.0;
        for (j, &sj) in scores.iter().enumerate() {
            if j != i {
                arg += smooth_indicator(sj - si, tau);
            }
        }
        log_arg[ri] = arg;
        sdcg += relevance[i] / arg.log2();
    }
    let value = sdcg / idcg;

    if !want_grad {
        return Some((value, None));
    }

    let ln2 = std::f64::consts::LN_2;
    let mut grad = vec![0.0; n];
    for (ri, &i) in relevant.iter().enumerate() {
        let si = scores[i];
        let arg = log_arg[ri];
        let l = arg.log2();
        let c = -(relevance[i] / idcg) / (arg * ln2 * l * l);
        for (j, &sj) in scores.iter().enumerate() {
            if j == i {
                continue;
            }
            let w = smooth_indicator_derivative(sj - si, tau);
            grad[j] += c * w;
            grad[i] -= c * w;
        }
    }
    Some((value, Some(grad)))
}

struct QueryOutcome {
    value: f64,
    /// d value / d score, indexed like the candidate list.
    dscores: Vec<f64>,
}

fn batch_loss_impl(
    embeddings: &[Vector],
    years: &[i32],
    cfg: &LossConfig,
    objective: Objective,
) -> Result<BatchLossResult> {
    cfg.validate()?;
    let b = embeddings.len();
    if b < 2 {
        return Err(RankError::BatchTooSmall(b));
    }
    if years.len() != b {
        return Err(RankError::LengthMismatch {
            left: b,
            right: years.len(),
        });
    }
    let sims = batch_similarities(embeddings)?;

    // Per-query work is independent; collect preserves query order so the
    // final reduction is deterministic for any thread count.
    let outcomes: Vec<Option<QueryOutcome>> = (0..b)
        .into_par_iter()
        .map(|q| {
            let candidates: Vec<usize> = (0..b).filter(|&i| i != q).collect();
            let scores: Vec<f64> = candidates.iter().map(|&i| sims[q][i]).collect();
            let result = match objective {
                Objective::SmoothAp => {
                    let positive: Vec<bool> = candidates
                        .iter()
                        .map(|&i| (years[i] - years[q]).abs() <= cfg.positive_gap)
                        .collect();
                    ap_value_grad(&scores, &positive, cfg.tau, true)
                }
                Objective::SmoothNdcg => {
                    let relevance: Vec<f64> = candidates
                        .iter()
                        .map(|&i| cfg.relevance.relevance(years[q], years[i]))
                        .collect();
                    ndcg_value_grad(&scores, &relevance, cfg.tau, true)
                }
            };
            result.map(|(value, grad)| QueryOutcome {
                value,
                dscores: grad.expect("gradient requested"),
            })
        })
        .collect();

    let used = outcomes.iter().filter(|o| o.is_some()).count();
    if used == 0 {
        return Err(RankError::AllQueriesSkipped);
    }
    let skipped = b - used;
    let mean: f64 = outcomes
        .iter()
        .flatten()
        .map(|o| o.value)
        .sum::<f64>()
        / used as f64;
    let loss = 1.0 - mean;
    if !loss.is_finite() {
        return Err(RankError::NonFinite("loss"));
    }

    // Chain d loss / d score into the raw embeddings through cosine
    // similarity; each item accumulates both its query role and its
    // candidate role, in fixed query order.
    let dim = embeddings[0].dim();
    let norms: Vec<f64> = embeddings.iter().map(Vector::norm).collect();
    let mut gradient = vec![vec![0.0; dim]; b];
    let scale = -1.0 / used as f64;
    for (q, outcome) in outcomes.iter().enumerate() {
        let Some(outcome) = outcome else { continue };
        let eq = embeddings[q].as_slice();
        let nq = norms[q];
        let mut ci = 0usize;
        for i in 0..b {
            if i == q {
                continue;
            }
            let g = scale * outcome.dscores[ci];
            ci += 1;
            if g == 0.0 {
                continue;
            }
            let ei = embeddings[i].as_slice();
            let ni = norms[i];
            let s = sims[q][i];
            let cross = g / (nq * ni);
            let self_i = g * s / (ni * ni);
            let self_q = g * s / (nq * nq);
            let (gi, gq) = if i < q {
                let (a, c) = gradient.split_at_mut(q);
                (&mut a[i], &mut c[0])
            } else {
                let (a, c) = gradient.split_at_mut(i);
                (&mut c[0], &mut a[q])
            };
            for t in 0..dim {
                gi[t] += cross * eq[t] - self_i * ei[t];
                gq[t] += cross * ei[t] - self_q * eq[t];
            }
        }
    }
    if gradient
        .iter()
        .any(|row| row.iter().any(|v| !v.is_finite()))
    {
        return Err(RankError::NonFinite("gradient"));
    }

    let per_query = outcomes
        .iter()
        .map(|o| o.as_ref().map(|o| 1.0 - o.value))
        .collect();
    Ok(BatchLossResult {
        loss,
        per_query,
        gradient,
        skipped,
    })
}
