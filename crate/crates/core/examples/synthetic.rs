//! Synthetic logs with planted long-term affinity and recent drift.
//!
//! cargo run --release --example synthetic

use tlsan::ingest::{extract_user_category, prepare};
use tlsan::synth::{category_label, generate_synthetic, SynthSpec};

fn main() -> tlsan::Result<()> {
    for drift in [0.0, 0.5, 1.0] {
        let spec = SynthSpec {
            recent_drift_probability: drift,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec)?;
        let ds = prepare(&data.reviews[..], &data.metadata[..], 10, spec.seed)?;

        // how often the held-out item leaves the user's long-term category
        let moved = ds
            .test
            .iter()
            .filter(|e| {
                let h = &ds.histories[e.user];
                e.target.category != extract_user_category(h, h.sessions.len() - 2, None)
            })
            .count();
        println!(
            "drift {drift:.1}: {} users, {} drifted, target off long-term category for {}/{}",
            ds.n_users(),
            data.users.iter().filter(|u| u.drift.is_some()).count(),
            moved,
            ds.test.len()
        );
    }

    let data = generate_synthetic(&SynthSpec::default())?;
    let u = &data.users[0];
    println!(
        "\nuser 0: primary {}, drift {:?}, {} sessions",
        category_label(u.primary),
        u.drift.map(category_label),
        u.sessions.len()
    );
    Ok(())
}
