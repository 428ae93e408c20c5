//! Day-level sessions and dynamic user categories.

use serde::{Deserialize, Serialize};

use super::filter::Interaction;

/// Dense category index reserved for "no category".
pub const UNKNOWN_CATEGORY_ID: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRef {
    pub item: usize,
    pub category: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub day: i64,
    pub items: Vec<ItemRef>,
}

/// A user's record partitioned into per-day sessions, oldest first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user: usize,
    pub sessions: Vec<Session>,
}

impl UserHistory {
    pub fn flatten(&self) -> impl Iterator<Item = (i64, ItemRef)> + '_ {
        self.sessions.iter().flat_map(|s| s.items.iter().map(move |&r| (s.day, r)))
    }

    pub fn len(&self) -> usize {
        self.sessions.iter().map(|s| s.items.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Sorted, de-duplicated set of every item the user touched.
    pub fn item_set(&self) -> Vec<usize> {
        let mut items: Vec<usize> = self.flatten().map(|(_, r)| r.item).collect();
        items.sort_unstable();
        items.dedup();
        items
    }
}

/// Group each user's interactions into one session per distinct day.
///
/// Records are stably sorted by `(user, timestamp)` first, so within-session
/// order is timestamp order with ties in input order. Users are returned in
/// ascending id order.
pub fn sessionize(interactions: &[Interaction]) -> Vec<UserHistory> {
    let mut sorted: Vec<&Interaction> = interactions.iter().collect();
    sorted.sort_by_key(|i| (i.user, i.timestamp));

    let mut out: Vec<UserHistory> = Vec::new();
    for i in sorted {
        let r = ItemRef {
            item: i.item,
            category: i.category,
        };
        match out.last_mut() {
            Some(h) if h.user == i.user => match h.sessions.last_mut() {
                Some(s) if s.day == i.day => s.items.push(r),
                _ => h.sessions.push(Session { day: i.day, items: vec![r] }),
            },
            _ => out.push(UserHistory {
                user: i.user,
                sessions: vec![Session { day: i.day, items: vec![r] }],
            }),
        }
    }
    out
}

/// Modal category over sessions `0..=upto_session`, with one occurrence of
/// `exclude` (its most recent one) left out. Ties go to the category seen
/// most recently. Returns [`UNKNOWN_CATEGORY_ID`] when nothing is left.
pub fn extract_user_category(history: &UserHistory, upto_session: usize, exclude: Option<usize>) -> usize {
    let items: Vec<ItemRef> = history.sessions[..=upto_session]
        .iter()
        .flat_map(|s| s.items.iter().copied())
        .collect();
    let skip = exclude.and_then(|target| items.iter().rposition(|r| r.item == target));
    modal_category(items.iter().enumerate().filter(|(k, _)| Some(*k) != skip).map(|(_, r)| r.category))
}

/// Mode of a chronological category sequence, ties to the latest seen.
pub fn modal_category(categories: impl IntoIterator<Item = usize>) -> usize {
    // category -> (count, last position)
    let mut stats: Vec<(usize, usize, usize)> = Vec::new();
    for (pos, c) in categories.into_iter().enumerate() {
        match stats.iter_mut().find(|s| s.0 == c) {
            Some(s) => {
                s.1 += 1;
                s.2 = pos;
            }
            None => stats.push((c, 1, pos)),
        }
    }
    stats
        .into_iter()
        .max_by_key(|&(_, count, last)| (count, last))
        .map(|(c, _, _)| c)
        .unwrap_or(UNKNOWN_CATEGORY_ID)
}
