//! Component ablations on planted data: full model, no short-term layer,
//! fixed γ, fixed position weights.
//!
//! cargo run --release --example ablation -- [epochs]

use tlsan::eval::DEFAULT_KS;
use tlsan::ingest::prepare;
use tlsan::model::Variant;
use tlsan::synth::{generate_synthetic, SynthSpec};
use tlsan::train::{train, TrainConfig, TrainOutputs};

fn main() -> tlsan::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let spec = SynthSpec {
        n_users: 2000,
        n_items: 1000,
        n_categories: 20,
        recent_drift_probability: 0.5,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    let ds = prepare(&data.reviews[..], &data.metadata[..], 10, 1)?;

    println!("variant  AUC     Recall@20  seconds");
    for variant in [Variant::Full, Variant::NoShort, Variant::NoGamma, Variant::NoPosition] {
        let config = TrainConfig { epochs, variant, eval_ks: DEFAULT_KS.to_vec(), ..TrainConfig::default() };
        let (_, report) = train(&ds, &config, &TrainOutputs::default())?;
        let r = &report.evals.last().expect("final eval").report;
        println!(
            "{:<8} {:.4}  {:.4}     {:.1}",
            variant.to_string(),
            r.auc,
            r.at(20).map_or(0.0, |a| a.recall),
            report.wall_clock_secs
        );
    }
    Ok(())
}
