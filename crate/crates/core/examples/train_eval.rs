//! Synthetic data, training, evaluation against popularity, then top-K
//! recommendations for one user.
//!
//! cargo run --release --example train_eval

use tlsan::eval::{evaluate, popularity_baseline, rank_catalog, EvalConfig, ModelScorer};
use tlsan::ingest::{build_serving_example, prepare};
use tlsan::synth::{category_label, generate_synthetic, SynthSpec};
use tlsan::train::{train, TrainConfig, TrainOutputs};

fn main() -> tlsan::Result<()> {
    let spec = SynthSpec {
        n_users: 1000,
        n_items: 500,
        n_categories: 10,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    let ds = prepare(&data.reviews[..], &data.metadata[..], 10, 1)?;

    let config = TrainConfig {
        epochs: 30,
        eval_every: 10,
        ..TrainConfig::default()
    };
    let (params, report) = train(&ds, &config, &TrainOutputs::default())?;
    for e in &report.evals {
        println!("epoch {:>3}  test AUC {:.4}", e.epoch, e.report.auc);
    }
    println!("{:.1}s, {} steps\n", report.wall_clock_secs, report.steps.len());

    let eval = EvalConfig::default();
    let scorer = ModelScorer { params: &params, item_categories: &ds.item_categories };
    let model = evaluate(&ds.test, &scorer, &ds, &eval)?;
    let pop = evaluate(&ds.test, &popularity_baseline(&ds.training_histories(), ds.n_items()), &ds, &eval)?;
    println!("model\n{}", model.table());
    println!("popularity\n{}", pop.table());

    let user = &data.users[0];
    let example = build_serving_example(&ds.histories[0], ds.manifest.max_long).expect("history");
    println!(
        "top 5 for {} (primary {}, drift {:?}):",
        ds.manifest.users[0],
        category_label(user.primary),
        user.drift.map(category_label)
    );
    for (item, score) in rank_catalog(&example, &params, &ds.item_categories, 5)? {
        let cat = &ds.manifest.categories[ds.item_categories[item]];
        println!("  {}  {cat}  {score:.3}", ds.manifest.items[item]);
    }
    Ok(())
}
