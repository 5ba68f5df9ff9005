//! Experiment-level analyses: year-bin similarity matrices, full retrieval
//! evaluation, and random baselines that set the floor a trained model must
//! clear.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LabeledItem;
use crate::error::{RankError, Result};
use crate::knn::{knn_predict, rank_support, weighted_knn_predict, SupportSet};
use crate::metrics::{average_precision, ndcg, MetricReport, RankedList};
use crate::ranking::{cosine_similarity, Vector};
use crate::relevance::RelevanceSpec;

/// Cap on sampled pairs per bin pair when averaging similarities.
const MAX_PAIRS_PER_CELL: usize = 100_000;

/// Mean pairwise cosine similarity between year bins.
#[derive(Debug, Clone)]
pub struct BinSimilarityMatrix {
    pub bin_width: i32,
    /// Inclusive year ranges, e.g. (1930, 1934).
    pub bins: Vec<(i32, i32)>,
    /// `mean[a][b]`: mean similarity over cross pairs (within-bin pairs on
    /// the diagonal, self-pairs excluded); `None` marks an empty cell.
    pub mean: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<u64>>,
}

impl BinSimilarityMatrix {
    pub fn label(&self, bin: usize) -> String {
        let (lo, hi) = self.bins[bin];
        format!("{lo}-{hi}")
    }

    /// CSV rendering: first row and column carry bin labels, missing entries
    /// are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let labels: Vec<String> = (0..self.bins.len()).map(|b| self.label(b)).collect();
        out.push_str(&format!(",{}\n", labels.join(",")));
        for (a, row) in self.mean.iter().enumerate() {
            out.push_str(&labels[a]);
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

fn embedding_of(item: &LabeledItem) -> Result<&Vector> {
    item.embedding.as_ref().ok_or(RankError::Empty("item embedding"))
}

/// Mean cosine similarity between items grouped into `bin_width`-year bins.
/// Cells with more than 10^5 pairs are subsampled under `seed`.
pub fn bin_similarity(
    items: &[LabeledItem],
    bin_width: i32,
    seed: u64,
) -> Result<BinSimilarityMatrix> {
    if bin_width < 1 {
        return Err(RankError::invalid("bin_width", "must be >= 1"));
    }
    if items.is_empty() {
        return Err(RankError::Empty("items"));
    }
    for item in items {
        embedding_of(item)?;
    }
    let min_year = items.iter().map(|i| i.year).min().unwrap();
    let max_year = items.iter().map(|i| i.year).max().unwrap();
    let n_bins = ((max_year - min_year) / bin_width) as usize + 1;
    let bins: Vec<(i32, i32)> = (0..n_bins)
        .map(|b| {
            let lo = min_year + b as i32 * bin_width;
            (lo, lo + bin_width - 1)
        })
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (idx, item) in items.iter().enumerate() {
        members[((item.year - min_year) / bin_width) as usize].push(idx);
    }
    let nonempty = members.iter().filter(|m| !m.is_empty()).count();
    if nonempty < 2 {
        return Err(RankError::invalid(
            "items",
            "need at least two non-empty bins",
        ));
    }

    let cells: Vec<(usize, usize)> = (0..n_bins)
        .flat_map(|a| (a..n_bins).map(move |b| (a, b)))
        .collect();
    let computed: Vec<(Option<f64>, u64)> = cells
        .par_iter()
        .map(|&(a, b)| {
            let (ma, mb) = (&members[a], &members[b]);
            let total = if a == b {
                ma.len().saturating_sub(1) * ma.len() / 2
            } else {
                ma.len() * mb.len()
            };
            if total == 0 {
                return Ok((None, 0));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add((a * n_bins + b) as u64),
            );
            let mut sum = 0.0;
            let mut count = 0u64;
            if total <= MAX_PAIRS_PER_CELL {
                if a == b {
                    for (i, &x) in ma.iter().enumerate() {
                        for &y in &ma[i + 1..] {
                            sum += cosine_similarity(
                                embedding_of(&items[x])?,
                                embedding_of(&items[y])?,
                            )?;
                            count += 1;
                        }
                    }
                } else {
                    for &x in ma {
                        for &y in mb {
                            sum += cosine_similarity(
                                embedding_of(&items[x])?,
                                embedding_of(&items[y])?,
                            )?;
                            count += 1;
                        }
                    }
                }
            } else {
                while (count as usize) < MAX_PAIRS_PER_CELL {
                    let x = ma[rng.random_range(0..ma.len())];
                    let y = mb[rng.random_range(0..mb.len())];
                    if x == y {
                        continue;
                    }
                    sum += cosine_similarity(
                        embedding_of(&items[x])?,
                        embedding_of(&items[y])?,
                    )?;
                    count += 1;
                }
            }
            Ok((Some(sum / count as f64), count))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean = vec![vec![None; n_bins]; n_bins];
    let mut counts = vec![vec![0u64; n_bins]; n_bins];
    for (&(a, b), (m, c)) in cells.iter().zip(computed) {
        mean[a][b] = m;
        mean[b][a] = m;
        counts[a][b] = c;
        counts[b][a] = c;
    }
    Ok(BinSimilarityMatrix {
        bin_width,
        bins,
        mean,
        counts,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(RankError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(RankError::Empty("correlation input"));
    }
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && vals[order[j + 1]] == vals[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &o in &order[i..=j] {
                ranks[o] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let mx = rx.iter().sum::<f64>() / rx.len() as f64;
    let my = ry.iter().sum::<f64>() / ry.len() as f64;
    let mut num = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(RankError::invalid("correlation", "zero variance"));
    }
    Ok(num / (vx * vy).sqrt())
}

/// Spearman correlation between bin distance and mean similarity over the
/// defined upper-triangle cells (diagonal included). Strongly negative means
/// closer years sit closer in embedding space.
pub fn gap_similarity_spearman(matrix: &BinSimilarityMatrix) -> Result<f64> {
    let mut gaps = Vec::new();
    let mut sims = Vec::new();
    for a in 0..matrix.bins.len() {
        for b in a..matrix.bins.len() {
            if let Some(m) = matrix.mean[a][b] {
                gaps.push((b - a) as f64);
                sims.push(m);
            }
        }
    }
    spearman(&gaps, &sims)
}

/// Ranking + prediction evaluation of embedded queries against a support set.
///
/// Per query: nDCG over the full ranked support under `relevance` (skipped
/// when total relevance is zero), AP with positives defined by
/// `|dy| <= positive_gap` (skipped when the query has no positive), and the
/// absolute error of the k-NN year prediction.
pub fn retrieval_metrics(
    queries: &[LabeledItem],
    support: &SupportSet,
    relevance: &RelevanceSpec,
    positive_gap: i32,
    k: usize,
    weighted: bool,
) -> Result<MetricReport> {
    if queries.is_empty() {
        return Err(RankError::Empty("queries"));
    }
    if positive_gap < 0 {
        return Err(RankError::invalid("positive_gap", "must be >= 0"));
    }
    let year_by_id: std::collections::HashMap<u64, i32> = support
        .items()
        .iter()
        .map(|s| (s.id, s.year))
        .collect();
    let per_query: Vec<(Option<f64>, Option<f64>, f64)> = queries
        .par_iter()
        .map(|q| {
            let embedding = embedding_of(q)?;
            let ranked = rank_support(embedding, support)?;
            let ordered: Vec<u64> = ranked.iter().map(|n| n.id).collect();
            let rels: Vec<f64> = ranked
                .iter()
                .map(|n| relevance.relevance(q.year, year_by_id[&n.id]))
                .collect();
            let ndcg_q = if rels.iter().any(|&r| r > 0.0) {
                let list = RankedList::new(q.id, ordered.clone(), rels, HashSet::new())?;
                Some(ndcg(&list)?)
            } else {
                None
            };
            let positives: HashSet<u64> = support
                .items()
                .iter()
                .filter(|s| (s.year - q.year).abs() <= positive_gap)
                .map(|s| s.id)
                .collect();
            let ap_q = if positives.is_empty() {
                None
            } else {
                let list = RankedList::binary_from_positives(q.id, ordered, positives)?;
                Some(average_precision(&list)?)
            };
            let pred = if weighted {
                weighted_knn_predict(embedding, support, k)?
            } else {
                knn_predict(embedding, support, k)?
            };
            Ok((ap_q, ndcg_q, f64::from((pred.year - q.year).abs())))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(assemble_report(&per_query))
}

fn assemble_report(per_query: &[(Option<f64>, Option<f64>, f64)]) -> MetricReport {
    let n_queries = per_query.len();
    let mut ap_sum = 0.0;
    let mut ap_n = 0usize;
    let mut ndcg_sum = 0.0;
    let mut ndcg_n = 0usize;
    let mut err_sum = 0.0;
    let mut skipped_union = 0usize;
    for (ap, nd, err) in per_query {
        if let Some(v) = ap {
            ap_sum += v;
            ap_n += 1;
        }
        if let Some(v) = nd {
            ndcg_sum += v;
            ndcg_n += 1;
        }
        if ap.is_none() || nd.is_none() {
            skipped_union += 1;
        }
        err_sum += err;
    }
    MetricReport {
        mae: Some(err_sum / n_queries as f64),
        map: if ap_n > 0 { Some(ap_sum / ap_n as f64) } else { None },
        ndcg: if ndcg_n > 0 { Some(ndcg_sum / ndcg_n as f64) } else { None },
        n_queries,
        n_skipped: skipped_union,
        n_skipped_map: n_queries - ap_n,
        n_skipped_ndcg: n_queries - ndcg_n,
        per_query_ap: per_query.iter().map(|p| p.0).collect(),
        per_query_ndcg: per_query.iter().map(|p| p.1).collect(),
        per_query_abs_err: per_query.iter().map(|p| p.2).collect(),
    }
}

/// Floor metrics: uniformly random rankings of the support and uniformly
/// random year predictions over the support span. Deterministic per seed.
pub fn random_baseline_metrics(
    queries: &[LabeledItem],
    support: &SupportSet,
    relevance: &RelevanceSpec,
    positive_gap: i32,
    seed: u64,
) -> Result<MetricReport> {
    if queries.is_empty() {
        return Err(RankError::Empty("queries"));
    }
    let (lo, hi) = support.year_span();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_query = Vec::with_capacity(queries.len());
    for q in queries {
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.shuffle(&mut rng);
        let ordered: Vec<u64> = order.iter().map(|&i| support.items()[i].id).collect();
        let rels: Vec<f64> = order
            .iter()
            .map(|&i| relevance.relevance(q.year, support.items()[i].year))
            .collect();
        let ndcg_q = if rels.iter().any(|&r| r > 0.0) {
            let list = RankedList::new(q.id, ordered.clone(), rels, HashSet::new())?;
            Some(ndcg(&list)?)
        } else {
            None
        };
        let positives: HashSet<u64> = support
            .items()
            .iter()
            .filter(|s| (s.year - q.year).abs() <= positive_gap)
            .map(|s| s.id)
            .collect();
        let ap_q = if positives.is_empty() {
            None
        } else {
            let list = RankedList::binary_from_positives(q.id, ordered, positives)?;
            Some(average_precision(&list)?)
        };
        let pred = rng.random_range(lo..=hi);
        per_query.push((ap_q, ndcg_q, f64::from((pred - q.year).abs())));
    }
    Ok(assemble_report(&per_query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::{SupportItem, SupportSource};
    use rand::Rng;

    fn embedded_item(id: u64, year: i32, v: Vec<f64>) -> LabeledItem {
        let mut item = LabeledItem::new(id, year, Vector::new(v.clone()).unwrap());
        item.embedding = Some(Vector::new(v).unwrap());
        item
    }

    #[test]
    fn identical_embeddings_give_all_ones() {
        let items: Vec<LabeledItem> = (0..20)
            .map(|i| embedded_item(i, 1930 + i as i32, vec![0.5, 0.5]))
            .collect();
        let matrix = bin_similarity(&items, 5, 1).unwrap();
        for row in &matrix.mean {
            for cell in row.iter().flatten() {
                assert!((cell - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_clusters_give_zero_cross_entry() {
        let mut items = Vec::new();
        for i in 0..10 {
            items.push(embedded_item(i, 1930, vec![1.0, 0.0]));
            items.push(embedded_item(100 + i, 1940, vec![0.0, 1.0]));
        }
        let matrix = bin_similarity(&items, 5, 1).unwrap();
        // bins: 1930-1934 (idx 0) and 1940-1944 (idx 2); 1935-1939 empty
        assert_eq!(matrix.mean[0][2], Some(0.0));
        assert!(matrix.mean[0][1].is_none());
        assert_eq!(matrix.mean[0][0], Some(1.0));
    }

    #[test]
    fn matrix_is_symmetric_and_shuffle_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut items: Vec<LabeledItem> = (0..120)
            .map(|i| {
                let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                embedded_item(i, 1930 + (i as i32 % 30), v)
            })
            .collect();
        let a = bin_similarity(&items, 5, 9).unwrap();
        for r in 0..a.bins.len() {
            for c in 0..a.bins.len() {
                match (a.mean[r][c], a.mean[c][r]) {
                    (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                    (None, None) => {}
                    other => panic!("asymmetric cell {other:?}"),
                }
            }
        }
        items.reverse();
        let b = bin_similarity(&items, 5, 9).unwrap();
        for r in 0..a.bins.len() {
            for c in 0..a.bins.len() {
                match (a.mean[r][c], b.mean[r][c]) {
                    (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                    (None, None) => {}
                    other => panic!("shuffle changed cell {other:?}"),
                }
            }
        }
    }

    #[test]
    fn csv_labels_and_missing_cells() {
        let items = vec![
            embedded_item(0, 1930, vec![1.0, 0.0]),
            embedded_item(1, 1931, vec![1.0, 0.1]),
            embedded_item(2, 1940, vec![0.0, 1.0]),
        ];
        let matrix = bin_similarity(&items, 5, 1).unwrap();
        let csv = matrix.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), ",1930-1934,1935-1939,1940-1944");
        let row0 = lines.next().unwrap();
        assert!(row0.starts_with("1930-1934,"));
        // middle bin is empty: its row has only empty fields
        let row1 = lines.next().unwrap();
        assert_eq!(row1, "1935-1939,,,");
    }

    #[test]
    fn spearman_perfect_and_inverse() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&xs, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[9.0, 7.0, 5.0, 3.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let xs = [1.0, 1.0, 2.0, 3.0];
        let ys = [5.0, 5.0, 4.0, 1.0];
        let r = spearman(&xs, &ys).unwrap();
        assert!(r < -0.9, "r = {r}");
    }

    fn toy_support() -> SupportSet {
        let items = (0..40u64)
            .map(|id| {
                let year = 1930 + (id as i32 % 20);
                let angle = f64::from(year - 1930) * 0.05;
                SupportItem {
                    id,
                    year,
                    embedding: Vector::new(vec![angle.cos(), angle.sin()]).unwrap(),
                }
            })
            .collect();
        SupportSet::from_parts(items, SupportSource::Full).unwrap()
    }

    #[test]
    fn retrieval_metrics_on_clean_geometry() {
        let support = toy_support();
        let queries: Vec<LabeledItem> = (0..10)
            .map(|i| {
                let year = 1930 + i as i32;
                let angle = i as f64 * 0.05;
                embedded_item(1000 + i, year, vec![angle.cos(), angle.sin()])
            })
            .collect();
        let report = retrieval_metrics(
            &queries,
            &support,
            &RelevanceSpec::default(),
            0,
            3,
            false,
        )
        .unwrap();
        assert_eq!(report.n_queries, 10);
        // perfect angular geometry: near-ideal ranking and exact-year neighbors
        assert!(report.ndcg.unwrap() > 0.95);
        assert!(report.mae.unwrap() < 2.0);
        assert!(report.map.unwrap() > 0.5);
    }

    #[test]
    fn random_baseline_is_deterministic_and_bounded() {
        let support = toy_support();
        let queries: Vec<LabeledItem> = (0..25)
            .map(|i| embedded_item(i, 1930 + (i as i32 % 20), vec![1.0, i as f64 * 0.01]))
            .collect();
        let a = random_baseline_metrics(&queries, &support, &RelevanceSpec::default(), 0, 3)
            .unwrap();
        let b = random_baseline_metrics(&queries, &support, &RelevanceSpec::default(), 0, 3)
            .unwrap();
        assert_eq!(a.ndcg, b.ndcg);
        assert_eq!(a.mae, b.mae);
        let nd = a.ndcg.unwrap();
        assert!(nd > 0.0 && nd < 1.0, "ndcg {nd}");
    }
}
