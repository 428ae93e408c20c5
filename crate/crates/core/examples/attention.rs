//! One feature-wise attention block and a full forward pass.
//!
//! cargo run --release --example attention

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tlsan::ingest::{ItemRef, LongItem};
use tlsan::linalg::Mat;
use tlsan::model::{feature_wise_attention, forward, AttentionParams, HyperParams, ModelParams, Variant};

fn main() -> tlsan::Result<()> {
    // 4 features, 2 heads, 3 positions with the last one padded
    let mut wa = Mat::identity(4);
    wa.set(2, 2, 0.5);
    wa.set(3, 3, 0.5);
    let wb = wa.clone();
    let zeros = vec![0.0; 4];
    let p = AttentionParams { wa: &wa, wb: &wb, ba: &zeros, bb: &zeros };
    let inputs = vec![vec![1.0, 0.0, 2.0, 0.0], vec![0.0, 1.0, 0.0, 2.0], vec![0.0; 4]];
    let att = feature_wise_attention(p, inputs, vec![true, true, false], 2)?;
    println!("weights (feature x position):");
    for f in 0..4 {
        println!("  {:?}", att.weights.row(f).iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>());
    }
    println!("context {:?}", att.context);

    let hyper = HyperParams {
        dim: 8,
        max_long: 4,
        heads: 4,
        n_users: 3,
        n_items: 20,
        n_categories: 4,
        variant: Variant::Full,
    };
    let params = ModelParams::init(hyper, &mut ChaCha8Rng::seed_from_u64(1))?;
    let item = |i: usize| ItemRef { item: i, category: i % 4 };
    let example = tlsan::ingest::Example {
        user: 1,
        user_category: 2,
        long_items: (0..3)
            .map(|i| LongItem { item: i, category: i % 4, day_delta: 9 - 3 * i as i64 })
            .collect(),
        short_items: vec![item(5), item(6)],
        target: item(7),
        is_test: false,
    };
    let candidates = [item(7), item(11)];
    let (scores, cache) = forward(&example, &candidates, &params)?;
    println!("\nu_t has {} features; scores {:?}", cache.u.len(), scores);
    Ok(())
}
