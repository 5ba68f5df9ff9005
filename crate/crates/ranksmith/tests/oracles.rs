//! Independent oracles for the exact metrics and the smooth relaxations:
//! exhaustive permutation enumeration, a literal precision-at-n expansion of
//! average precision, the tau -> 0 limit against the exact metric, and a
//! closed form for the random-prediction error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ranksmith::{
    average_precision, dcg, ideal_dcg, ndcg, smooth_ap_from_scores, smooth_ndcg_from_scores,
    RankedList, Temperature,
};
use std::collections::HashSet;

fn graded(rels: &[f64]) -> RankedList {
    let items: Vec<u64> = (0..rels.len() as u64).collect();
    RankedList::new(7, items, rels.to_vec(), HashSet::new()).unwrap()
}

fn binary(rels: &[u8]) -> RankedList {
    let items: Vec<u64> = (0..rels.len() as u64).collect();
    let positives = items
        .iter()
        .zip(rels)
        .filter(|(_, &r)| r == 1)
        .map(|(&id, _)| id)
        .collect();
    RankedList::binary_from_positives(7, items, positives).unwrap()
}

fn permutations<T: Clone>(xs: &[T]) -> Vec<Vec<T>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Brute-force AP: precision at each rank recomputed by rescanning the
/// prefix, summed over relevant positions.
fn ap_brute_force(rels: &[u8]) -> f64 {
    let total: usize = rels.iter().map(|&r| r as usize).sum();
    let mut sum = 0.0;
    for n in 1..=rels.len() {
        if rels[n - 1] == 1 {
            let hits_at_n = rels[..n].iter().filter(|&&r| r == 1).count();
            sum += hits_at_n as f64 / n as f64;
        }
    }
    sum / total as f64
}

#[test]
fn no_ordering_beats_ideal_dcg_exhaustively() {
    // all orderings of all lists up to n = 6
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=6usize {
        for _ in 0..4 {
            let rels: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0f64)).collect();
            let ideal = ideal_dcg(&graded(&rels));
            for perm in permutations(&rels) {
                let list = graded(&perm);
                let d = dcg(&list);
                assert!(d <= ideal + 1e-12, "dcg {d} beats ideal {ideal}");
                if ideal > 0.0 {
                    let v = ndcg(&list).unwrap();
                    assert!(v <= 1.0 + 1e-12);
                }
            }
        }
    }
}

#[test]
fn ndcg_is_one_exactly_on_ideal_orderings() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=6usize {
        let rels: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0f64)).collect();
        for perm in permutations(&rels) {
            let is_sorted = perm.windows(2).all(|w| w[0] >= w[1]);
            let v = ndcg(&graded(&perm)).unwrap();
            if is_sorted {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert!(v < 1.0, "non-ideal ordering {perm:?} scored 1");
            }
        }
    }
}

#[test]
fn average_precision_matches_brute_force_exhaustively() {
    // every binary relevance pattern with at least one positive, n <= 6
    for n in 1..=6usize {
        for mask in 1u32..(1 << n) {
            let rels: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            let direct = average_precision(&binary(&rels)).unwrap();
            let brute = ap_brute_force(&rels);
            assert!(
                (direct - brute).abs() < 1e-12,
                "pattern {rels:?}: {direct} vs {brute}"
            );
        }
    }
}

#[test]
fn smooth_ndcg_approaches_exact_ndcg_at_small_tau() {
    // tau = 1e-4, minimum pairwise score gap 0.01: the smooth value must sit
    // within 1e-3 of the exact nDCG of the induced hard ranking.
    let tau = Temperature::new(1e-4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..100 {
        let n = rng.random_range(3..12usize);
        let mut scores: Vec<f64> = Vec::with_capacity(n);
        let mut s = rng.random_range(-0.5..0.5);
        for _ in 0..n {
            scores.push(s);
            s += 0.01 + rng.random_range(0.0..0.05);
        }
        scores.shuffle(&mut rng);
        let rels: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0f64)).collect();
        let smooth = smooth_ndcg_from_scores(&scores, &rels, tau).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let ordered_rels: Vec<f64> = order.iter().map(|&i| rels[i]).collect();
        let exact = ndcg(&graded(&ordered_rels)).unwrap();
        assert!(
            (smooth - exact).abs() <= 1e-3,
            "trial {trial}: smooth {smooth} vs exact {exact}"
        );
    }
}

#[test]
fn smooth_ap_approaches_exact_ap_at_small_tau() {
    let tau = Temperature::new(1e-4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let n = rng.random_range(3..12usize);
        let mut scores: Vec<f64> = Vec::with_capacity(n);
        let mut s = rng.random_range(-0.5..0.5);
        for _ in 0..n {
            scores.push(s);
            s += 0.01 + rng.random_range(0.0..0.05);
        }
        scores.shuffle(&mut rng);
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if !positive.iter().any(|&p| p) {
            continue;
        }
        let smooth = smooth_ap_from_scores(&scores, &positive, tau).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let rels: Vec<u8> = order.iter().map(|&i| u8::from(positive[i])).collect();
        let exact = ap_brute_force(&rels);
        assert!(
            (smooth - exact).abs() <= 1e-3,
            "trial {trial}: smooth {smooth} vs exact {exact}"
        );
    }
}

#[test]
fn random_year_prediction_error_matches_closed_form() {
    // two independent uniform draws over L years: E|X - Y| = (L^2 - 1) / (3L)
    let span = 70u32;
    let closed_form = f64::from(span * span - 1) / f64::from(3 * span);
    assert!((closed_form - 23.328571).abs() < 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sum = 0.0;
    let trials = 200_000;
    for _ in 0..trials {
        let x = rng.random_range(1930..=1999);
        let y: i32 = rng.random_range(1930..=1999);
        sum += f64::from((x - y).abs());
    }
    let monte_carlo = sum / f64::from(trials);
    assert!(
        (monte_carlo - closed_form).abs() < 0.5,
        "mc {monte_carlo} vs closed form {closed_form}"
    );
}
