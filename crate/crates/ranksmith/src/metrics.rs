//! Exact (non-smooth) retrieval and regression metrics: AP, mAP, DCG, IDCG,
//! nDCG, and MAE.
//!
//! These are both the evaluation targets and the oracles the smooth losses
//! are checked against. Positions are 1-based and the DCG discount is
//! `log2(n + 1)` exactly.

use std::collections::HashSet;

use crate::error::{RankError, Result};

/// One query's retrieval outcome: items in descending-similarity order, a
/// relevance grade per item, and (for binary metrics) the positive set.
///
/// Ties in retrieved order are expected to be broken by ascending item id
/// before construction so that metric values are reproducible; see
/// [`crate::knn::rank_support`], which produces this canonical order.
#[derive(Debug, Clone)]
pub struct RankedList {
    pub query_id: u64,
    pub ordered_items: Vec<u64>,
    pub relevance: Vec<f64>,
    pub positives: HashSet<u64>,
}

impl RankedList {
    pub fn new(
        query_id: u64,
        ordered_items: Vec<u64>,
        relevance: Vec<f64>,
        positives: HashSet<u64>,
    ) -> Result<Self> {
        if ordered_items.is_empty() {
            return Err(RankError::Empty("ranked list"));
        }
        if ordered_items.len() != relevance.len() {
            return Err(RankError::LengthMismatch {
                left: ordered_items.len(),
                right: relevance.len(),
            });
        }
        if relevance.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(RankError::NonFinite("relevance grade"));
        }
        let unique: HashSet<_> = ordered_items.iter().collect();
        if unique.len() != ordered_items.len() {
            return Err(RankError::invalid("ordered_items", "duplicate item id"));
        }
        if !positives.iter().all(|p| unique.contains(p)) {
            return Err(RankError::invalid(
                "positives",
                "positive ids must appear in ordered_items",
            ));
        }
        Ok(RankedList {
            query_id,
            ordered_items,
            relevance,
            positives,
        })
    }

    /// A binary-relevance list where relevance is the indicator of
    /// membership in `positives` — the form [`average_precision`] consumes.
    pub fn binary_from_positives(
        query_id: u64,
        ordered_items: Vec<u64>,
        positives: HashSet<u64>,
    ) -> Result<Self> {
        let relevance = ordered_items
            .iter()
            .map(|id| if positives.contains(id) { 1.0 } else { 0.0 })
            .collect();
        Self::new(query_id, ordered_items, relevance, positives)
    }

    pub fn len(&self) -> usize {
        self.ordered_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_items.is_empty()
    }
}

/// Average precision: the mean of precision-at-n over the positive positions.
///
/// Requires binary relevance consistent with the positive set and at least
/// one positive; an empty positive set leaves AP undefined.
pub fn average_precision(list: &RankedList) -> Result<f64> {
    if list.positives.is_empty() {
        return Err(RankError::NoPositives);
    }
    for (id, &r) in list.ordered_items.iter().zip(&list.relevance) {
        let expected = if list.positives.contains(id) { 1.0 } else { 0.0 };
        if r != expected {
            return Err(RankError::NotBinary);
        }
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (n, id) in list.ordered_items.iter().enumerate() {
        if list.positives.contains(id) {
            hits += 1;
            sum += hits as f64 / (n + 1) as f64;
        }
    }
    Ok(sum / list.positives.len() as f64)
}

/// Arithmetic mean of per-query average precision.
pub fn mean_average_precision(lists: &[RankedList]) -> Result<f64> {
    if lists.is_empty() {
        return Err(RankError::Empty("query list"));
    }
    let mut sum = 0.0;
    for list in lists {
        sum += average_precision(list)?;
    }
    Ok(sum / lists.len() as f64)
}

fn dcg_of(relevances: impl Iterator<Item = f64>) -> f64 {
    relevances
        .enumerate()
        .map(|(n, r)| r / ((n + 2) as f64).log2())
        .sum()
}

/// Discounted cumulative gain of the list in its retrieved order.
pub fn dcg(list: &RankedList) -> f64 {
    dcg_of(list.relevance.iter().copied())
}

/// DCG of the same relevance multiset sorted descending; an upper bound on
/// [`dcg`] over all orderings.
pub fn ideal_dcg(list: &RankedList) -> f64 {
    let mut sorted = list.relevance.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    dcg_of(sorted.into_iter())
}

/// Normalized DCG in [0, 1]; undefined (error) when every relevance is zero.
///
/// Callers aggregating over queries must skip all-zero-relevance queries and
/// record the skip rather than coerce 0/0.
pub fn ndcg(list: &RankedList) -> Result<f64> {
    let ideal = ideal_dcg(list);
    if ideal == 0.0 {
        return Err(RankError::ZeroRelevance);
    }
    Ok(dcg(list) / ideal)
}

/// Mean absolute error between predicted and true years.
pub fn mean_absolute_error(predictions: &[i32], truths: &[i32]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(RankError::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(RankError::Empty("predictions"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(&p, &t)| (f64::from(p) - f64::from(t)).abs())
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Aggregated evaluation over a query set.
///
/// `map`/`ndcg` are means over the queries where the metric is defined;
/// queries skipped for one metric still count toward the others. The JSON
/// form is flat: `mae`, `map`, `ndcg`, `n_queries`, `n_skipped`.
#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub mae: Option<f64>,
    pub map: Option<f64>,
    pub ndcg: Option<f64>,
    pub n_queries: usize,
    /// Queries skipped from at least one ranking metric.
    pub n_skipped: usize,
    pub n_skipped_map: usize,
    pub n_skipped_ndcg: usize,
    pub per_query_ap: Vec<Option<f64>>,
    pub per_query_ndcg: Vec<Option<f64>>,
    pub per_query_abs_err: Vec<f64>,
}

impl MetricReport {
    /// Flat key/value JSON document with exactly the keys
    /// `mae`, `map`, `ndcg`, `n_queries`, `n_skipped`.
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "mae": self.mae,
            "map": self.map,
            "ndcg": self.ndcg,
            "n_queries": self.n_queries,
            "n_skipped": self.n_skipped,
        });
        doc.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary(rels: &[u8]) -> RankedList {
        let items: Vec<u64> = (0..rels.len() as u64).collect();
        let positives = items
            .iter()
            .zip(rels)
            .filter(|(_, &r)| r == 1)
            .map(|(&id, _)| id)
            .collect();
        RankedList::binary_from_positives(99, items, positives).unwrap()
    }

    fn graded(rels: &[f64]) -> RankedList {
        let items: Vec<u64> = (0..rels.len() as u64).collect();
        RankedList::new(99, items, rels.to_vec(), HashSet::new()).unwrap()
    }

    #[test]
    fn ap_all_positives_first() {
        assert!((average_precision(&binary(&[1, 1, 0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_interleaved() {
        let got = average_precision(&binary(&[1, 0, 1])).unwrap();
        assert!((got - 0.833333).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn ap_single_positive_last() {
        let got = average_precision(&binary(&[0, 0, 1])).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ap_requires_positives() {
        assert!(matches!(
            average_precision(&binary(&[0, 0, 0])),
            Err(RankError::NoPositives)
        ));
    }

    #[test]
    fn ap_rejects_graded_relevance() {
        let list = graded(&[2.0, 0.0]);
        let mut list = list;
        list.positives.insert(0);
        assert!(matches!(average_precision(&list), Err(RankError::NotBinary)));
    }

    #[test]
    fn map_means_over_queries() {
        let lists = vec![binary(&[1, 1, 0]), binary(&[0, 1, 0])];
        let got = mean_average_precision(&lists).unwrap();
        assert!((got - 0.75).abs() < 1e-12);
    }

    #[test]
    fn map_single_list_is_its_ap() {
        let lists = vec![binary(&[1, 0, 1])];
        let a = mean_average_precision(&lists).unwrap();
        let b = average_precision(&lists[0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn map_of_spec_pair() {
        let lists = vec![binary(&[1, 0, 1]), binary(&[0, 0, 1])];
        let got = mean_average_precision(&lists).unwrap();
        assert!((got - 0.583333).abs() < 1e-6);
    }

    #[test]
    fn map_empty_is_usage_error() {
        assert!(mean_average_precision(&[]).is_err());
    }

    #[test]
    fn dcg_zero_relevance() {
        assert_eq!(dcg(&graded(&[0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn dcg_direct_evaluation() {
        let got = dcg(&graded(&[3.0, 1.0, 2.0]));
        assert!((got - 4.630930).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn dcg_single_item() {
        assert!((dcg(&graded(&[5.0])) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_dcg_sorts_descending() {
        let got = ideal_dcg(&graded(&[3.0, 1.0, 2.0]));
        assert!((got - 4.761860).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn ideal_dcg_of_sorted_input_equals_dcg() {
        let list = graded(&[9.0, 4.0, 1.0]);
        assert_eq!(ideal_dcg(&list), dcg(&list));
    }

    #[test]
    fn ndcg_perfect_order() {
        assert!((ndcg(&graded(&[3.0, 2.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_retrieved_vs_ideal() {
        // 4.630930 / 4.761860
        let got = ndcg(&graded(&[3.0, 1.0, 2.0])).unwrap();
        assert!((got - 0.9725044904).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn ndcg_reverse_ideal_order() {
        // dcg(1,2,3) = 1 + 2/log2(3) + 3/2 = 3.761860, the minimum over
        // all orderings of this multiset (checked exhaustively below).
        let list = graded(&[1.0, 2.0, 3.0]);
        let d = dcg(&list);
        assert!((d - 3.761860).abs() < 1e-6, "got {d}");
        let got = ndcg(&list).unwrap();
        assert!((got - 0.789998).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn ndcg_all_zero_is_domain_error() {
        assert!(matches!(
            ndcg(&graded(&[0.0, 0.0])),
            Err(RankError::ZeroRelevance)
        ));
    }

    #[test]
    fn mae_exact_predictions() {
        assert_eq!(mean_absolute_error(&[1955, 1958], &[1955, 1958]).unwrap(), 0.0);
    }

    #[test]
    fn mae_mixed() {
        let got = mean_absolute_error(&[1950, 1960], &[1955, 1958]).unwrap();
        assert!((got - 3.5).abs() < 1e-12);
    }

    #[test]
    fn mae_span_extremes() {
        assert_eq!(mean_absolute_error(&[1930], &[1999]).unwrap(), 69.0);
    }

    #[test]
    fn mae_length_mismatch() {
        assert!(mean_absolute_error(&[1950], &[1955, 1958]).is_err());
    }

    #[test]
    fn report_json_is_flat_with_fixed_keys() {
        let report = MetricReport {
            mae: Some(3.5),
            map: None,
            ndcg: Some(0.9),
            n_queries: 10,
            n_skipped: 2,
            ..Default::default()
        };
        let parsed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        let obj = parsed.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["mae", "map", "n_queries", "n_skipped", "ndcg"]);
        assert!(obj["map"].is_null());
        assert_eq!(obj["n_queries"], 10);
    }

    fn permutations(rels: &[f64]) -> Vec<Vec<f64>> {
        if rels.len() <= 1 {
            return vec![rels.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..rels.len() {
            let mut rest = rels.to_vec();
            let head = rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn reverse_order_minimizes_dcg_exhaustively() {
        let rels = [3.0, 1.0, 2.0];
        let mut asc = rels.to_vec();
        asc.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let reverse_ideal = dcg(&graded(&asc));
        for perm in permutations(&rels) {
            assert!(dcg(&graded(&perm)) >= reverse_ideal - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn prop_dcg_bounded_by_ideal(rels in prop::collection::vec(0.0f64..10.0, 1..8)) {
            let list = graded(&rels);
            let d = dcg(&list);
            let i = ideal_dcg(&list);
            prop_assert!(d >= 0.0 && d <= i + 1e-12);
            if i > 0.0 {
                let n = ndcg(&list).unwrap();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
            }
        }

        #[test]
        fn prop_ndcg_scale_invariant(
            rels in prop::collection::vec(0.0f64..10.0, 2..8),
            c in 0.01f64..100.0,
        ) {
            prop_assume!(rels.iter().any(|&r| r > 0.0));
            let base = ndcg(&graded(&rels)).unwrap();
            let scaled: Vec<f64> = rels.iter().map(|r| r * c).collect();
            let got = ndcg(&graded(&scaled)).unwrap();
            prop_assert!((base - got).abs() < 1e-12);
        }

        #[test]
        fn prop_moving_positive_earlier_never_decreases_ap(
            rels in prop::collection::vec(0u8..2, 2..10),
            pick in 0usize..10,
        ) {
            prop_assume!(rels.iter().any(|&r| r == 1));
            let positions: Vec<usize> = rels
                .iter()
                .enumerate()
                .filter(|(_, &r)| r == 1)
                .map(|(i, _)| i)
                .collect();
            let pos = positions[pick % positions.len()];
            prop_assume!(pos > 0);
            let before = average_precision(&binary(&rels)).unwrap();
            let mut moved = rels.clone();
            moved.swap(pos, pos - 1);
            let after = average_precision(&binary(&moved)).unwrap();
            prop_assert!(after >= before - 1e-12);
        }

        #[test]
        fn prop_mae_translation_invariant(
            pairs in prop::collection::vec((1900i32..2000, 1900i32..2000), 1..20),
            shift in -50i32..50,
        ) {
            let preds: Vec<i32> = pairs.iter().map(|p| p.0).collect();
            let truths: Vec<i32> = pairs.iter().map(|p| p.1).collect();
            let base = mean_absolute_error(&preds, &truths).unwrap();
            let preds_s: Vec<i32> = preds.iter().map(|p| p + shift).collect();
            let truths_s: Vec<i32> = truths.iter().map(|t| t + shift).collect();
            let shifted = mean_absolute_error(&preds_s, &truths_s).unwrap();
            prop_assert!((base - shifted).abs() < 1e-12);
        }
    }
}
