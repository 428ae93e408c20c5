//! Raw review/metadata logs to a prepared dataset.
//!
//! cargo run --release --example ingest -- [reviews.json meta.json]
//!
//! Without arguments a small synthetic log is written to a temp dir first.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use tlsan::ingest::prepare;
use tlsan::synth::{generate_synthetic, SynthSpec};

fn main() -> tlsan::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (reviews, meta) = match args.as_slice() {
        [r, m] => (PathBuf::from(r), PathBuf::from(m)),
        _ => {
            let dir = std::env::temp_dir().join("tlsan-ingest-example");
            std::fs::create_dir_all(&dir)?;
            let (r, m) = (dir.join("reviews.json"), dir.join("meta.json"));
            generate_synthetic(&SynthSpec::default())?.write(&r, &m)?;
            (r, m)
        }
    };

    let ds = prepare(
        BufReader::new(File::open(&reviews)?),
        BufReader::new(File::open(&meta)?),
        10,
        1,
    )?;
    let m = &ds.manifest;
    println!("users {}  items {}  categories {}  samples {}", m.n_users, m.n_items, m.n_categories, m.n_samples);
    println!("train {}  test {}  excluded {}", m.n_train, m.n_test, m.excluded_users);
    println!("filter: {:?}", m.filter);

    let h = &ds.histories[0];
    println!("\nuser {} has {} sessions:", m.users[h.user], h.sessions.len());
    for s in &h.sessions {
        let items: Vec<&str> = s.items.iter().map(|r| m.items[r.item].as_str()).collect();
        println!("  day {:>6}  {}", s.day, items.join(" "));
    }
    if let Some(t) = ds.test.iter().find(|e| e.user == h.user) {
        println!(
            "test example: {} long, {} short, target {} (category {})",
            t.long_items.len(),
            t.short_items.len(),
            m.items[t.target.item],
            m.categories[t.target.category]
        );
    }
    Ok(())
}
