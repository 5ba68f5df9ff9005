use std::time::Instant;
use ranksmith::*;

fn main() {
    let t0 = Instant::now();
    let spec = SyntheticSpec { n_items: 50_200, ..SyntheticSpec::default() };
    let items = generate(&spec).unwrap();
    println!("gen {:?}", t0.elapsed());
    let (support_items, queries) = items.split_at(50_000);
    let sup_entries: Vec<SupportItem> = support_items
        .iter()
        .map(|i| SupportItem { id: i.id, year: i.year, embedding: i.features.clone() })
        .collect();
    let support = SupportSet::from_parts(sup_entries, SupportSource::Full).unwrap();

    let t1 = Instant::now();
    let index = build_ann(&support, &AnnConfig::default()).unwrap();
    println!("build {:?}", t1.elapsed());

    let t2 = Instant::now();
    let exact: Vec<Vec<u64>> = queries
        .iter()
        .map(|q| rank_support(&q.features, &support).unwrap().into_iter().take(10).map(|n| n.id).collect())
        .collect();
    println!("exact scan {:?}", t2.elapsed());

    let t3 = Instant::now();
    let mut hits = 0usize;
    for (q, truth) in queries.iter().zip(&exact) {
        let got: Vec<u64> = index.query(&q.features, 10).unwrap().iter().map(|n| n.id).collect();
        hits += truth.iter().filter(|id| got.contains(id)).count();
    }
    let recall = hits as f64 / (10 * queries.len()) as f64;
    println!("ann queries {:?}; recall@10 = {recall:.4}", t3.elapsed());

    // full-budget exactness
    let full = AnnConfig { search_budget: 50_000, ..AnnConfig::default() };
    let t4 = Instant::now();
    let index_full = build_ann(&support, &full).unwrap();
    let mut exact_matches = 0usize;
    for (q, truth) in queries.iter().zip(&exact).take(50) {
        let got: Vec<u64> = index_full.query(&q.features, 10).unwrap().iter().map(|n| n.id).collect();
        if &got == truth { exact_matches += 1; }
    }
    println!("full-budget {:?}; exact matches 50/{exact_matches}", t4.elapsed());
    println!("total {:?}", t0.elapsed());
}
