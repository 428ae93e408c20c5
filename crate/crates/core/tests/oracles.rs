mod common;

use common::{instance, max_abs_diff, naive_user_vectors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlsan::eval::{evaluate, CatalogScorer, EvalConfig, ModelScorer};
use tlsan::ingest::{prepare, Dataset, Example};
use tlsan::model::{encode, HyperParams, ModelParams, Variant};
use tlsan::synth::{generate_synthetic, SynthSpec};

#[test]
fn layers_match_naive_recomputation() {
    for seed in 0..100 {
        let (params, example) = instance(seed);
        let cache = encode(&example, &params).unwrap();
        let (u_long, u) = naive_user_vectors(&example, &params);
        assert!(max_abs_diff(&cache.u_long, &u_long) <= 1e-12, "seed {seed}: long-term");
        assert!(max_abs_diff(&cache.u, &u) <= 1e-12, "seed {seed}: short-term");
    }
}

fn dataset(n_users: usize, n_items: usize) -> Dataset {
    let spec = SynthSpec {
        n_users,
        n_items,
        n_categories: 20,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    prepare(&data.reviews[..], &data.metadata[..], 10, 1).unwrap()
}

struct TargetFirst(usize);

impl CatalogScorer for TargetFirst {
    fn catalog_scores(&self, example: &Example) -> tlsan::Result<Vec<f64>> {
        let mut s = vec![0.0; self.0];
        s[example.target.item] = 1.0;
        Ok(s)
    }
}

#[test]
fn ranking_every_target_first_is_perfect() {
    let ds = dataset(300, 200);
    // items from the input session are never recommended, so a repeat
    // target cannot be hit
    let reachable: Vec<Example> = ds
        .test
        .iter()
        .filter(|e| e.short_items.iter().all(|s| s.item != e.target.item))
        .cloned()
        .collect();
    assert!(reachable.len() > 250);
    let report = evaluate(&reachable, &TargetFirst(ds.n_items()), &ds, &EvalConfig::default()).unwrap();
    assert_eq!(report.auc, 1.0);
    let at1 = report.at(1).unwrap();
    assert_eq!((at1.precision, at1.recall), (1.0, 1.0));
}

/// Uniformly random log: no category or sequence structure at all.
fn random_log(n_users: usize, n_items: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reviews = String::new();
    for u in 0..n_users {
        let days: Vec<i64> = (0..6).map(|_| rng.gen_range(0..30)).collect();
        for k in 0..20 {
            let line = serde_json::json!({
                "reviewerID": format!("U{u}"),
                "asin": format!("I{}", rng.gen_range(0..n_items)),
                "unixReviewTime": 1_400_000_000 + days[k % 6] * 86_400 + k as i64,
            });
            reviews.push_str(&line.to_string());
            reviews.push('\n');
        }
    }
    let mut meta = String::new();
    for i in 0..n_items {
        let line = serde_json::json!({"asin": format!("I{i}"), "categories": [["Root", format!("C{}", rng.gen_range(0..20))]]});
        meta.push_str(&line.to_string());
        meta.push('\n');
    }
    prepare(reviews.as_bytes(), meta.as_bytes(), 10, seed).unwrap()
}

#[test]
fn random_parameters_score_chance_auc() {
    let ds = random_log(1100, 1000, 3);
    assert!(ds.test.len() >= 1000, "{} test users", ds.test.len());
    let hyper = HyperParams {
        dim: 32,
        max_long: 10,
        heads: 8,
        n_users: ds.n_users(),
        n_items: ds.n_items(),
        n_categories: ds.n_categories(),
        variant: Variant::Full,
    };
    let params = ModelParams::init(hyper, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let scorer = ModelScorer { params: &params, item_categories: &ds.item_categories };
    let report = evaluate(&ds.test, &scorer, &ds, &EvalConfig::default()).unwrap();
    assert!((report.auc - 0.5).abs() <= 0.05, "AUC {}", report.auc);
}
