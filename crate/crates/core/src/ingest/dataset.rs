//! Prepared dataset: manifest, histories and examples, with a binary file
//! format and a TSV debug dump.
//!
//! File layout (little-endian):
//!
//! ```text
//! "TLSD" | version u16 | manifest_len u32 | manifest JSON (UTF-8)
//! n_items u32 | item category u32 * n_items
//! n_histories u32 | per history: user u32, n_sessions u32,
//!                   per session: day i64, n u32, item u32 * n
//! n_train u32 | examples
//! n_test u32  | examples
//! example: user u32, user_category u32, target_item u32, target_category u32,
//!          n_long u32, (item u32, category u32, day_delta u32) * n_long,
//!          n_short u32, (item u32, category u32) * n_short
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::examples::{build_examples, Example, LongItem};
use super::filter::{FilterStats, Filtered};
use super::session::{sessionize, ItemRef, Session, UserHistory};
use crate::codec::{write_atomic, Decoder, Encoder};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"TLSD";
pub const DATASET_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    /// Interactions after filtering.
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Users dropped for having fewer than two sessions.
    pub excluded_users: usize,
    pub max_long: usize,
    pub seed: u64,
    /// External ids, position = dense id.
    pub users: Vec<String>,
    pub items: Vec<String>,
    pub categories: Vec<String>,
    pub filter: FilterStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub item_categories: Vec<usize>,
    /// Indexed by dense user id.
    pub histories: Vec<UserHistory>,
    /// One training draw per usable user (made with `manifest.seed`).
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    /// Sessionize the filtered interactions and draw examples.
    pub fn build(filtered: Filtered, max_long: usize, seed: u64) -> Dataset {
        let histories = sessionize(&filtered.interactions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut excluded = 0;
        for h in &histories {
            match build_examples(h, max_long, &mut rng) {
                Some((tr, te)) => {
                    train.push(tr);
                    test.extend(te);
                }
                None => excluded += 1,
            }
        }
        let manifest = DatasetManifest {
            n_users: filtered.users.len(),
            n_items: filtered.items.len(),
            n_categories: filtered.categories.len(),
            n_samples: filtered.interactions.len(),
            n_train: train.len(),
            n_test: test.len(),
            excluded_users: excluded,
            max_long,
            seed,
            users: filtered.users,
            items: filtered.items,
            categories: filtered.categories,
            filter: filtered.stats,
        };
        Dataset {
            manifest,
            item_categories: filtered.item_categories,
            histories,
            train,
            test,
        }
    }

    pub fn n_users(&self) -> usize {
        self.manifest.n_users
    }

    pub fn n_items(&self) -> usize {
        self.manifest.n_items
    }

    pub fn n_categories(&self) -> usize {
        self.manifest.n_categories
    }

    pub fn item_ref(&self, item: usize) -> ItemRef {
        ItemRef {
            item,
            category: self.item_categories[item],
        }
    }

    /// Histories restricted to what training may see: the held-out final
    /// session of test users is removed.
    pub fn training_histories(&self) -> Vec<UserHistory> {
        self.histories
            .iter()
            .map(|h| {
                let mut h = h.clone();
                if h.sessions.len() >= 3 {
                    h.sessions.pop();
                }
                h
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut e = Encoder::new();
        e.bytes(&DATASET_MAGIC);
        e.u16(DATASET_VERSION);
        let manifest = serde_json::to_vec(&self.manifest)?;
        e.index(manifest.len());
        e.bytes(&manifest);

        e.index(self.item_categories.len());
        for &c in &self.item_categories {
            e.index(c);
        }
        e.index(self.histories.len());
        for h in &self.histories {
            e.index(h.user);
            e.index(h.sessions.len());
            for s in &h.sessions {
                e.i64(s.day);
                e.index(s.items.len());
                for r in &s.items {
                    e.index(r.item);
                }
            }
        }
        for set in [&self.train, &self.test] {
            e.index(set.len());
            for ex in set {
                encode_example(&mut e, ex);
            }
        }
        Ok(e.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        let mut d = Decoder::new(bytes);
        d.magic(DATASET_MAGIC)?;
        let version = d.u16("version")?;
        if version != DATASET_VERSION {
            return Err(Error::Version {
                expected: DATASET_VERSION,
                found: version,
            });
        }
        let len = d.index("manifest length")?;
        let manifest: DatasetManifest = serde_json::from_slice(d.take(len, "manifest")?)?;
        check_manifest(&manifest)?;

        let n_items = d.index("item count")?;
        if n_items != manifest.n_items {
            return Err(Error::Corrupt(format!("{n_items} item categories for {} items", manifest.n_items)));
        }
        let item_categories = (0..n_items)
            .map(|_| d.index_below(manifest.n_categories, "item category"))
            .collect::<Result<Vec<_>>>()?;

        let n_hist = d.index("history count")?;
        let mut histories = Vec::with_capacity(n_hist.min(bytes.len()));
        for _ in 0..n_hist {
            let user = d.index_below(manifest.n_users, "user")?;
            let n_sessions = d.index("session count")?;
            let mut sessions = Vec::with_capacity(n_sessions.min(bytes.len()));
            for _ in 0..n_sessions {
                let day = d.i64("day")?;
                let n = d.index("session length")?;
                let items = (0..n)
                    .map(|_| {
                        let item = d.index_below(n_items, "item")?;
                        Ok(ItemRef {
                            item,
                            category: item_categories[item],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                sessions.push(Session { day, items });
            }
            histories.push(UserHistory { user, sessions });
        }

        let mut sets = [Vec::new(), Vec::new()];
        for (k, set) in sets.iter_mut().enumerate() {
            let n = d.index("example count")?;
            for _ in 0..n {
                set.push(decode_example(&mut d, &manifest, k == 1)?);
            }
        }
        d.finish()?;
        let [train, test] = sets;
        Ok(Dataset {
            manifest,
            item_categories,
            histories,
            train,
            test,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Dataset> {
        Dataset::from_bytes(&std::fs::read(path)?)
    }

    /// One example per line:
    /// `split user user_category target long short`, with long items as
    /// `item:category:delta` and short items as `item:category`, comma separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("split\tuser\tuser_category\ttarget\tlong\tshort\n");
        for ex in self.train.iter().chain(&self.test) {
            let long: Vec<String> = ex
                .long_items
                .iter()
                .map(|l| format!("{}:{}:{}", l.item, l.category, l.day_delta))
                .collect();
            let short: Vec<String> = ex.short_items.iter().map(|s| format!("{}:{}", s.item, s.category)).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}:{}\t{}\t{}",
                if ex.is_test { "test" } else { "train" },
                ex.user,
                ex.user_category,
                ex.target.item,
                ex.target.category,
                long.join(","),
                short.join(",")
            );
        }
        out
    }
}

fn check_manifest(m: &DatasetManifest) -> Result<()> {
    if m.users.len() != m.n_users || m.items.len() != m.n_items || m.categories.len() != m.n_categories {
        return Err(Error::Corrupt("manifest counts disagree with id maps".into()));
    }
    Ok(())
}

fn encode_example(e: &mut Encoder, ex: &Example) {
    e.index(ex.user);
    e.index(ex.user_category);
    e.index(ex.target.item);
    e.index(ex.target.category);
    e.index(ex.long_items.len());
    for l in &ex.long_items {
        e.index(l.item);
        e.index(l.category);
        e.index(l.day_delta as usize);
    }
    e.index(ex.short_items.len());
    for s in &ex.short_items {
        e.index(s.item);
        e.index(s.category);
    }
}

fn decode_example(d: &mut Decoder<'_>, m: &DatasetManifest, is_test: bool) -> Result<Example> {
    let user = d.index_below(m.n_users, "example user")?;
    let user_category = d.index_below(m.n_categories, "user category")?;
    let target = ItemRef {
        item: d.index_below(m.n_items, "target")?,
        category: d.index_below(m.n_categories, "target category")?,
    };
    let n_long = d.index("long length")?;
    if n_long > m.max_long {
        return Err(Error::Corrupt(format!("{n_long} long items exceeds limit {}", m.max_long)));
    }
    let long_items = (0..n_long)
        .map(|_| {
            Ok(LongItem {
                item: d.index_below(m.n_items, "long item")?,
                category: d.index_below(m.n_categories, "long category")?,
                day_delta: d.index("day delta")? as i64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_short = d.index("short length")?;
    let short_items = (0..n_short)
        .map(|_| {
            Ok(ItemRef {
                item: d.index_below(m.n_items, "short item")?,
                category: d.index_below(m.n_categories, "short category")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Example {
        user,
        user_category,
        long_items,
        short_items,
        target,
        is_test,
    })
}
