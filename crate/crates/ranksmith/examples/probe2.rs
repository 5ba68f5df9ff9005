use ranksmith::*;

fn main() {
    for run_seed in [42u64, 7, 123] {
        let spec = SyntheticSpec { seed: run_seed, ..SyntheticSpec::default() };
        let items = generate(&spec).unwrap();
        let (train_items, _, test_items) = split(&items, (0.93, 0.0, 0.07), run_seed + 1, true).unwrap();
        let untrained = Encoder::init_affine(spec.d_in, 16, run_seed + 2).unwrap();
        let mut enc = untrained.clone();
        let cfg = TrainConfig {
            batch_size: 64,
            max_iterations: 2000,
            eval_every: 2000,
            seed: run_seed + 3,
            ..TrainConfig::default()
        };
        train(&train_items, None, &cfg, &mut enc).unwrap();

        let embed = |e: &Encoder, xs: &[LabeledItem]| -> Vec<LabeledItem> {
            let mut out = xs.to_vec();
            for it in &mut out {
                it.embedding = Some(e.encode_item(it).unwrap());
            }
            out
        };
        let sup_t = SupportSet::from_items(&embed(&enc, &train_items)).unwrap();
        let q_t = embed(&enc, &test_items);
        let rep = retrieval_metrics(&q_t, &sup_t, &RelevanceSpec::default(), 0, 10, false).unwrap();
        let rep_w = retrieval_metrics(&q_t, &sup_t, &RelevanceSpec::default(), 0, 10, true).unwrap();
        let sup_u = SupportSet::from_items(&embed(&untrained, &train_items)).unwrap();
        let q_u = embed(&untrained, &test_items);
        let rep_u = retrieval_metrics(&q_u, &sup_u, &RelevanceSpec::default(), 0, 10, false).unwrap();
        let base = random_baseline_metrics(&q_t, &sup_t, &RelevanceSpec::default(), 0, run_seed + 4).unwrap();
        let sp_test = gap_similarity_spearman(&bin_similarity(&q_t, 5, run_seed + 5).unwrap()).unwrap();
        let tr_emb = embed(&enc, &train_items);
        let sp_train = gap_similarity_spearman(&bin_similarity(&tr_emb, 5, run_seed + 5).unwrap()).unwrap();
        println!(
            "seed {run_seed}: ndcg={:.4} mae={:.3} (w {:.3}) untrained-mae={:.3} rand-ndcg={:.4} sp(test)={:.3} sp(train)={:.3}",
            rep.ndcg.unwrap(), rep.mae.unwrap(), rep_w.mae.unwrap(),
            rep_u.mae.unwrap(), base.ndcg.unwrap(), sp_test, sp_train
        );
    }
}
