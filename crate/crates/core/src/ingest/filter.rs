//! User/item frequency filters, recency window and dense id assignment.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::raw::UNKNOWN_CATEGORY;
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Users with fewer interactions are dropped (first pass).
pub const MIN_USER_INTERACTIONS: usize = 10;
/// Items with fewer interactions are dropped (first pass).
pub const MIN_ITEM_INTERACTIONS: usize = 8;
/// Trailing window kept per user, in days.
pub const RECENT_DAYS: i64 = 90;
/// Surviving users must satisfy `MIN_EXCLUSIVE < n < MAX_EXCLUSIVE`.
pub const MIN_EXCLUSIVE: usize = 4;
pub const MAX_EXCLUSIVE: usize = 90;

/// A review joined with its item's category label, still keyed by external ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledReview {
    pub user: String,
    pub item: String,
    pub category: String,
    pub timestamp: i64,
}

/// One behavior record after id mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub category: usize,
    pub timestamp: i64,
    pub day: i64,
}

pub fn day_of(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input_records: usize,
    pub removed_by_frequency: usize,
    pub removed_by_window: usize,
    pub removed_users_by_count: usize,
}

/// Output of [`filter_dataset`]: dense interactions plus the id maps that
/// index them (position = dense id).
#[derive(Clone, Debug)]
pub struct Filtered {
    pub interactions: Vec<Interaction>,
    pub users: Vec<String>,
    pub items: Vec<String>,
    /// Index 0 is always [`UNKNOWN_CATEGORY`].
    pub categories: Vec<String>,
    /// Dense category of every dense item.
    pub item_categories: Vec<usize>,
    pub stats: FilterStats,
}

impl Filtered {
    /// Records back in external-id form, e.g. to re-run the filter.
    pub fn to_labeled(&self) -> Vec<LabeledReview> {
        self.interactions
            .iter()
            .map(|i| LabeledReview {
                user: self.users[i.user].clone(),
                item: self.items[i.item].clone(),
                category: self.categories[i.category].clone(),
                timestamp: i.timestamp,
            })
            .collect()
    }
}

/// Apply the frequency filters (users < 10 and items < 8, one simultaneous
/// pass over the input counts), truncate every surviving user to the trailing
/// 90 days of their record, then keep users with 4 < n < 90 interactions.
///
/// Dense ids are assigned afterwards in lexicographic order of external ids.
/// Output is grouped by user, each user's records sorted by timestamp with
/// ties kept in input order.
pub fn filter_dataset(records: &[LabeledReview]) -> Result<Filtered> {
    let mut stats = FilterStats {
        input_records: records.len(),
        ..Default::default()
    };

    let mut user_counts: HashMap<&str, usize> = HashMap::new();
    let mut item_counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *user_counts.entry(&r.user).or_default() += 1;
        *item_counts.entry(&r.item).or_default() += 1;
    }

    let mut per_user: HashMap<&str, Vec<&LabeledReview>> = HashMap::new();
    for r in records {
        if user_counts[r.user.as_str()] >= MIN_USER_INTERACTIONS
            && item_counts[r.item.as_str()] >= MIN_ITEM_INTERACTIONS
        {
            per_user.entry(&r.user).or_default().push(r);
        } else {
            stats.removed_by_frequency += 1;
        }
    }

    let mut kept: Vec<(&str, Vec<&LabeledReview>)> = Vec::new();
    for (user, mut recs) in per_user {
        recs.sort_by_key(|r| r.timestamp);
        let last_day = day_of(recs.last().expect("non-empty").timestamp);
        let before = recs.len();
        recs.retain(|r| day_of(r.timestamp) > last_day - RECENT_DAYS);
        stats.removed_by_window += before - recs.len();
        let n = recs.len();
        if n > MIN_EXCLUSIVE && n < MAX_EXCLUSIVE {
            kept.push((user, recs));
        } else {
            stats.removed_users_by_count += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    kept.sort_by(|a, b| a.0.cmp(b.0));

    let items: BTreeSet<&str> = kept.iter().flat_map(|(_, rs)| rs.iter().map(|r| r.item.as_str())).collect();
    let labels: BTreeSet<&str> = kept
        .iter()
        .flat_map(|(_, rs)| rs.iter().map(|r| r.category.as_str()))
        .filter(|c| *c != UNKNOWN_CATEGORY)
        .collect();

    let users: Vec<String> = kept.iter().map(|(u, _)| u.to_string()).collect();
    let items: Vec<String> = items.into_iter().map(str::to_string).collect();
    let mut categories = vec![UNKNOWN_CATEGORY.to_string()];
    categories.extend(labels.into_iter().map(str::to_string));

    let item_index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let category_index: HashMap<&str, usize> =
        categories.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut item_categories = vec![0usize; items.len()];
    let mut interactions = Vec::new();
    for (u, (_, recs)) in kept.iter().enumerate() {
        for r in recs {
            let item = item_index[r.item.as_str()];
            let category = category_index[r.category.as_str()];
            item_categories[item] = category;
            interactions.push(Interaction {
                user: u,
                item,
                category,
                timestamp: r.timestamp,
                day: day_of(r.timestamp),
            });
        }
    }

    Ok(Filtered {
        interactions,
        users,
        items,
        categories,
        item_categories,
        stats,
    })
}
