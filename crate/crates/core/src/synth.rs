//! Synthetic review logs with planted long- and short-term structure.
//!
//! Every user has a primary category that dominates their older sessions.
//! With probability `recent_drift_probability` a second category takes over
//! the final two sessions, which fall within the last five days. The first
//! item of the final session (the held-out test target) is forced into the
//! drift category when the user drifted, else into the primary one.
//!
//! Items are drawn from per-category shuffled decks, so interaction counts
//! are balanced within a category. The output passes the preprocessing
//! filters without removing anyone, or generation fails with
//! [`Error::Infeasible`].

use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::write_atomic;
use crate::error::{Error, Result};
use crate::ingest::filter::{MAX_EXCLUSIVE, MIN_ITEM_INTERACTIONS, RECENT_DAYS, SECONDS_PER_DAY};

/// Midnight UTC, 2014-05-12.
pub const EPOCH_BASE: i64 = 16_203 * SECONDS_PER_DAY;
/// Final window (in days) holding the last two sessions.
pub const RECENT_WINDOW: usize = 5;

const MIN_SESSIONS: usize = 5;
const MAX_SESSIONS: usize = 9;
const MIN_SESSION_ITEMS: usize = 2;
const MAX_SESSION_ITEMS: usize = 5;
const MIN_USER_ITEMS: usize = 10;
const MAX_USER_ITEMS: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub days: usize,
    /// Probability an item follows the user's dominant category of the moment.
    pub long_affinity_strength: f64,
    pub recent_drift_probability: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 200,
            n_items: 400,
            n_categories: 8,
            days: 60,
            long_affinity_strength: 0.8,
            recent_drift_probability: 0.5,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if self.n_categories < 2 {
            return bad("need at least 2 categories".into());
        }
        if self.n_items == 0 || !self.n_items.is_multiple_of(self.n_categories) {
            return bad(format!(
                "n_items {} not divisible by n_categories {}",
                self.n_items, self.n_categories
            ));
        }
        if self.days < 10 {
            return bad(format!("days {} < 10", self.days));
        }
        for (name, p) in [
            ("long_affinity_strength", self.long_affinity_strength),
            ("recent_drift_probability", self.recent_drift_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} not in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// The structure planted for one user (category indices are 0-based
/// synthetic categories, not dataset ids).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedUser {
    pub id: String,
    pub primary: usize,
    pub drift: Option<usize>,
    /// `(day, [(item, category)])` oldest first; the last session is the
    /// held-out one.
    pub sessions: Vec<(usize, Vec<(usize, usize)>)>,
}

impl PlantedUser {
    /// Category the held-out target was forced into.
    pub fn target_category(&self) -> usize {
        self.drift.unwrap_or(self.primary)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub spec: SynthSpec,
    /// Review JSON lines.
    pub reviews: Vec<u8>,
    /// Metadata JSON lines.
    pub metadata: Vec<u8>,
    pub users: Vec<PlantedUser>,
}

impl SynthData {
    pub fn write(&self, reviews: &Path, metadata: &Path) -> Result<()> {
        write_atomic(reviews, &self.reviews)?;
        write_atomic(metadata, &self.metadata)
    }
}

pub fn user_id(u: usize) -> String {
    format!("A{u:07}")
}

pub fn item_id(i: usize) -> String {
    format!("B{i:07}")
}

pub fn category_label(c: usize) -> String {
    format!("Cat{c:02}")
}

#[derive(Serialize)]
struct ReviewLine<'a> {
    #[serde(rename = "reviewerID")]
    reviewer_id: &'a str,
    asin: &'a str,
    #[serde(rename = "unixReviewTime")]
    unix_review_time: i64,
}

#[derive(Serialize)]
struct MetaLine<'a> {
    asin: &'a str,
    categories: [[&'a str; 2]; 1],
}

/// Cycles through a category's items in reshuffled order.
struct Deck {
    items: Vec<usize>,
    next: usize,
}

impl Deck {
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.next == 0 {
            self.items.shuffle(rng);
        }
        let item = self.items[self.next];
        self.next = (self.next + 1) % self.items.len();
        item
    }
}

fn other_category(rng: &mut ChaCha8Rng, n: usize, not: usize) -> usize {
    let c = rng.gen_range(0..n - 1);
    if c >= not {
        c + 1
    } else {
        c
    }
}

fn session_sizes(rng: &mut ChaCha8Rng, n_sessions: usize) -> Vec<usize> {
    loop {
        let sizes: Vec<usize> = (0..n_sessions)
            .map(|_| rng.gen_range(MIN_SESSION_ITEMS..=MAX_SESSION_ITEMS))
            .collect();
        let total: usize = sizes.iter().sum();
        if (MIN_USER_ITEMS..=MAX_USER_ITEMS).contains(&total) {
            return sizes;
        }
    }
}

/// Whether `c` is strictly the most frequent value.
fn strictly_modal(cats: &[usize], c: usize, n: usize) -> bool {
    let mut counts = vec![0usize; n];
    for &x in cats {
        counts[x] += 1;
    }
    counts.iter().enumerate().all(|(k, &v)| k == c || v < counts[c])
}

fn user_categories(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    sizes: &[usize],
    primary: usize,
    drift: Option<usize>,
) -> Vec<Vec<usize>> {
    let n = sizes.len();
    let recent = drift.unwrap_or(primary);
    let draw = |rng: &mut ChaCha8Rng, dominant: usize| {
        if rng.gen_bool(spec.long_affinity_strength) {
            dominant
        } else {
            other_category(rng, spec.n_categories, dominant)
        }
    };
    // the primary category must be the strict mode of the sessions it owns
    let owned = if drift.is_some() { n - 2 } else { n - 1 };
    for _ in 0..100 {
        let mut cats: Vec<Vec<usize>> = sizes
            .iter()
            .enumerate()
            .map(|(s, &len)| {
                let dom = if s + 2 >= n { recent } else { primary };
                (0..len).map(|_| draw(rng, dom)).collect()
            })
            .collect();
        cats[n - 1][0] = recent;
        let flat: Vec<usize> = cats[..owned].iter().flatten().copied().collect();
        if strictly_modal(&flat, primary, spec.n_categories) {
            return cats;
        }
    }
    let mut cats: Vec<Vec<usize>> = sizes
        .iter()
        .enumerate()
        .map(|(s, &len)| vec![if s + 2 >= n { recent } else { primary }; len])
        .collect();
    cats[n - 1][0] = recent;
    cats
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per_category = spec.n_items / spec.n_categories;
    let mut decks: Vec<Deck> = (0..spec.n_categories)
        .map(|c| Deck {
            items: (c * per_category..(c + 1) * per_category).collect(),
            next: 0,
        })
        .collect();

    // every session within the trailing 90 days of the user's last one
    let span = spec.days.min(RECENT_DAYS as usize);
    let first_day = spec.days - span;
    let early_days = span - RECENT_WINDOW;
    let max_sessions = MAX_SESSIONS.min(early_days + 2);

    let mut users = Vec::with_capacity(spec.n_users);
    let mut counts = vec![0usize; spec.n_items];
    for u in 0..spec.n_users {
        let primary = rng.gen_range(0..spec.n_categories);
        let drift = rng
            .gen_bool(spec.recent_drift_probability)
            .then(|| other_category(&mut rng, spec.n_categories, primary));
        let n_sessions = rng.gen_range(MIN_SESSIONS..=max_sessions);
        let sizes = session_sizes(&mut rng, n_sessions);

        let mut days: Vec<usize> = index::sample(&mut rng, early_days, n_sessions - 2)
            .into_iter()
            .map(|d| first_day + d)
            .collect();
        days.sort_unstable();
        let mut recent: Vec<usize> = index::sample(&mut rng, RECENT_WINDOW, 2)
            .into_iter()
            .map(|d| spec.days - RECENT_WINDOW + d)
            .collect();
        recent.sort_unstable();
        days.extend(recent);

        let cats = user_categories(&mut rng, spec, &sizes, primary, drift);
        let sessions: Vec<(usize, Vec<(usize, usize)>)> = days
            .into_iter()
            .zip(cats)
            .map(|(day, cs)| {
                let items = cs
                    .into_iter()
                    .map(|c| {
                        let item = decks[c].draw(&mut rng);
                        counts[item] += 1;
                        (item, c)
                    })
                    .collect();
                (day, items)
            })
            .collect();
        debug_assert!(sizes.iter().sum::<usize>() < MAX_EXCLUSIVE);
        users.push(PlantedUser {
            id: user_id(u),
            primary,
            drift,
            sessions,
        });
    }

    if let Some((item, &c)) = counts.iter().enumerate().min_by_key(|(_, &c)| c) {
        if c < MIN_ITEM_INTERACTIONS {
            return Err(Error::Infeasible(format!(
                "item {item} drew only {c} interactions (need {MIN_ITEM_INTERACTIONS}); add users or reduce items"
            )));
        }
    }

    let mut reviews = Vec::new();
    for user in &users {
        for (day, items) in &user.sessions {
            for (k, &(item, _)) in items.iter().enumerate() {
                let line = ReviewLine {
                    reviewer_id: &user.id,
                    asin: &item_id(item),
                    unix_review_time: EPOCH_BASE + *day as i64 * SECONDS_PER_DAY + 8 * 3600 + 97 * k as i64,
                };
                serde_json::to_writer(&mut reviews, &line)?;
                reviews.push(b'\n');
            }
        }
    }
    let mut metadata = Vec::new();
    for item in 0..spec.n_items {
        let asin = item_id(item);
        let label = category_label(item / per_category);
        serde_json::to_writer(
            &mut metadata,
            &MetaLine {
                asin: &asin,
                categories: [["Synthetic", &label]],
            },
        )?;
        metadata.write_all(b"\n")?;
    }
    Ok(SynthData {
        spec: spec.clone(),
        reviews,
        metadata,
        users,
    })
}
