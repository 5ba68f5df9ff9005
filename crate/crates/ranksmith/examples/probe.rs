use std::time::Instant;

use ranksmith::*;

fn eval_model(
    enc: &Encoder,
    train_items: &[LabeledItem],
    test_items: &[LabeledItem],
    k: usize,
    weighted: bool,
) -> MetricReport {
    let mut support_items = train_items.to_vec();
    for item in &mut support_items {
        item.embedding = Some(enc.encode_item(item).unwrap());
    }
    let support = SupportSet::from_items(&support_items).unwrap();
    let mut queries = test_items.to_vec();
    for item in &mut queries {
        item.embedding = Some(enc.encode_item(item).unwrap());
    }
    retrieval_metrics(&queries, &support, &RelevanceSpec::default(), 0, k, weighted).unwrap()
}

fn main() {
    let t0 = Instant::now();
    let spec = SyntheticSpec::default();
    let items = generate(&spec).unwrap();
    let (train_items, _, test_items) = split(&items, (0.93, 0.0, 0.07), 43, true).unwrap();
    println!("train {} test {} ({:?})", train_items.len(), test_items.len(), t0.elapsed());

    let untrained = Encoder::init_affine(spec.d_in, 16, 44).unwrap();
    let untrained_report = eval_model(&untrained, &train_items, &test_items, 10, false);
    println!(
        "untrained: mae={:.3} ndcg={:.4} map={:?} ({:?})",
        untrained_report.mae.unwrap(),
        untrained_report.ndcg.unwrap(),
        untrained_report.map,
        t0.elapsed()
    );

    let mut enc = Encoder::init_affine(spec.d_in, 16, 44).unwrap();
    let cfg = TrainConfig {
        batch_size: 64,
        max_iterations: 2000,
        eval_every: 200,
        seed: 45,
        ..TrainConfig::default()
    };
    let t1 = Instant::now();
    let log = train(&train_items, None, &cfg, &mut enc).unwrap();
    println!("train time {:?}", t1.elapsed());
    for r in &log.records {
        println!("  it {:5} loss {:.4} batch-ndcg {:.4}", r.iteration, r.loss, r.train_ndcg);
    }

    let trained_plain = eval_model(&enc, &train_items, &test_items, 10, false);
    let trained_weighted = eval_model(&enc, &train_items, &test_items, 10, true);
    println!(
        "trained:   mae={:.3} ndcg={:.4} map={:?}",
        trained_plain.mae.unwrap(),
        trained_plain.ndcg.unwrap(),
        trained_plain.map,
    );
    println!("weighted:  mae={:.3}", trained_weighted.mae.unwrap());

    // random-ranking baseline
    let mut support_items = train_items.clone();
    for item in &mut support_items {
        item.embedding = Some(enc.encode_item(item).unwrap());
    }
    let support = SupportSet::from_items(&support_items).unwrap();
    let mut queries = test_items.clone();
    for item in &mut queries {
        item.embedding = Some(enc.encode_item(item).unwrap());
    }
    let baseline =
        random_baseline_metrics(&queries, &support, &RelevanceSpec::default(), 0, 46).unwrap();
    println!(
        "random baseline: mae={:.3} ndcg={:.4}",
        baseline.mae.unwrap(),
        baseline.ndcg.unwrap()
    );

    // bin similarity on test embeddings
    let matrix = bin_similarity(&queries, 5, 47).unwrap();
    let rho = gap_similarity_spearman(&matrix).unwrap();
    println!("bin-sim spearman = {rho:.4}");

    println!(
        "criteria: ndcg>=0.90 {} | mae<=0.5*untrained {} ({:.2} vs {:.2}) | ndcg>=rand+0.1 {} | |w-p|<=1 {}",
        trained_plain.ndcg.unwrap() >= 0.90,
        trained_plain.mae.unwrap() <= 0.5 * untrained_report.mae.unwrap(),
        trained_plain.mae.unwrap(),
        0.5 * untrained_report.mae.unwrap(),
        trained_plain.ndcg.unwrap() >= baseline.ndcg.unwrap() + 0.1,
        (trained_weighted.mae.unwrap() - trained_plain.mae.unwrap()).abs() <= 1.0,
    );
    println!("total {:?}", t0.elapsed());
}
