//! Train/test example construction and negative sampling.
//!
//! For a user with sessions `S_1..S_n`:
//! - `n == 2`: the newest session is `S_2`; there is no test example.
//! - `n >= 3`: the last session is held out; the newest session is `S_{n-1}`
//!   and the test target is the first item of `S_n`.
//!
//! Long-term items are the last `max_long` items of every session before the
//! newest one, with day deltas relative to the newest session's day.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::session::{extract_user_category, ItemRef, UserHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongItem {
    pub item: usize,
    pub category: usize,
    pub day_delta: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub user: usize,
    pub user_category: usize,
    /// Chronological, at most `max_long` entries.
    pub long_items: Vec<LongItem>,
    pub short_items: Vec<ItemRef>,
    pub target: ItemRef,
    pub is_test: bool,
}

/// Index of the newest (short-term) session, if the user is usable at all.
pub fn newest_session(history: &UserHistory) -> Option<usize> {
    match history.sessions.len() {
        0 | 1 => None,
        2 => Some(1),
        n => Some(n - 2),
    }
}

fn long_items(history: &UserHistory, before: usize, ref_day: i64, max_long: usize) -> Vec<LongItem> {
    let flat: Vec<LongItem> = history.sessions[..before]
        .iter()
        .flat_map(|s| {
            s.items.iter().map(move |r| LongItem {
                item: r.item,
                category: r.category,
                day_delta: ref_day - s.day,
            })
        })
        .collect();
    let start = flat.len().saturating_sub(max_long);
    flat[start..].to_vec()
}

/// Draw one training example. Returns `None` for users with fewer than two
/// sessions.
pub fn build_train_example<R: Rng + ?Sized>(history: &UserHistory, max_long: usize, rng: &mut R) -> Option<Example> {
    let t = newest_session(history)?;
    let newest = &history.sessions[t];
    let following = history.sessions.get(t + 1);

    // (target, session providing short-term items, whether target sits in the newest session)
    let (target, short_session, from_newest) = if newest.items.len() > 1 {
        (newest.items[rng.gen_range(0..newest.items.len())], t, true)
    } else if let Some(next) = following {
        (next.items[0], t, false)
    } else {
        // single-item newest session with nothing after it: predict that
        // item from the previous session
        (newest.items[0], t - 1, true)
    };

    let short_items: Vec<ItemRef> = history.sessions[short_session]
        .items
        .iter()
        .copied()
        .filter(|r| r.item != target.item)
        .collect();
    Some(Example {
        user: history.user,
        user_category: extract_user_category(history, t, from_newest.then_some(target.item)),
        long_items: long_items(history, short_session, newest.day, max_long),
        short_items,
        target,
        is_test: false,
    })
}

/// The deterministic test example, if the user has a held-out session.
pub fn build_test_example(history: &UserHistory, max_long: usize) -> Option<Example> {
    let t = newest_session(history)?;
    let next = history.sessions.get(t + 1)?;
    let newest = &history.sessions[t];
    Some(Example {
        user: history.user,
        user_category: extract_user_category(history, t, None),
        long_items: long_items(history, t, newest.day, max_long),
        short_items: newest.items.clone(),
        target: next.items[0],
        is_test: true,
    })
}

/// Context for recommending beyond the end of the history: the last session
/// is the short-term input and everything before it is long-term. `target`
/// repeats the last item and carries no meaning.
pub fn build_serving_example(history: &UserHistory, max_long: usize) -> Option<Example> {
    let t = history.sessions.len().checked_sub(1)?;
    let newest = &history.sessions[t];
    let last = *newest.items.last()?;
    Some(Example {
        user: history.user,
        user_category: extract_user_category(history, t, None),
        long_items: long_items(history, t, newest.day, max_long),
        short_items: newest.items.clone(),
        target: last,
        is_test: false,
    })
}

/// Training example plus optional test example; `None` when the user has
/// fewer than two sessions.
pub fn build_examples<R: Rng + ?Sized>(
    history: &UserHistory,
    max_long: usize,
    rng: &mut R,
) -> Option<(Example, Option<Example>)> {
    let train = build_train_example(history, max_long, rng)?;
    Some((train, build_test_example(history, max_long)))
}

/// Uniform draw from `0..n_items` minus `history`, which must be sorted and
/// de-duplicated with `history.len() < n_items`.
pub fn sample_negative<R: Rng + ?Sized>(rng: &mut R, history: &[usize], n_items: usize) -> usize {
    debug_assert!(history.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(history.len() < n_items);
    // k-th eligible item: skip past every history entry at or below it
    let mut k = rng.gen_range(0..n_items - history.len());
    for &h in history {
        if h <= k {
            k += 1;
        } else {
            break;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::session::Session;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn r(item: usize) -> ItemRef {
        ItemRef { item, category: item % 3 + 1 }
    }

    fn hist(sessions: &[(i64, &[usize])]) -> UserHistory {
        UserHistory {
            user: 7,
            sessions: sessions
                .iter()
                .map(|(d, items)| Session {
                    day: *d,
                    items: items.iter().map(|&i| r(i)).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn serving_example_uses_whole_history() {
        let h = hist(&[(1, &[1, 2]), (4, &[3]), (6, &[4, 5])]);
        let e = build_serving_example(&h, 10).unwrap();
        assert_eq!(e.short_items, vec![r(4), r(5)]);
        let deltas: Vec<i64> = e.long_items.iter().map(|l| l.day_delta).collect();
        assert_eq!(deltas, vec![5, 5, 2]);
        assert!(build_serving_example(&hist(&[]), 10).is_none());
    }

    #[test]
    fn two_session_history() {
        let h = hist(&[(1, &[1, 2, 3]), (2, &[4, 5])]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (train, test) = build_examples(&h, 10, &mut rng).unwrap();
            assert!(test.is_none());
            assert!(train.target.item == 4 || train.target.item == 5);
            let other = if train.target.item == 4 { 5 } else { 4 };
            assert_eq!(train.short_items, vec![r(other)]);
            assert_eq!(
                train.long_items.iter().map(|l| (l.item, l.day_delta)).collect::<Vec<_>>(),
                vec![(1, 1), (2, 1), (3, 1)]
            );
        }
    }

    #[test]
    fn held_out_session_gives_test_example() {
        let h = hist(&[(1, &[1, 2]), (3, &[3, 4]), (4, &[5, 6])]);
        let test = build_test_example(&h, 10).unwrap();
        assert_eq!(test.target, r(5));
        assert_eq!(test.short_items, vec![r(3), r(4)]);
        assert_eq!(test.long_items.iter().map(|l| l.day_delta).collect::<Vec<_>>(), vec![2, 2]);
        assert!(test.is_test);
    }

    #[test]
    fn single_item_newest_uses_next_session() {
        let h = hist(&[(1, &[1, 2]), (3, &[3]), (4, &[5, 6])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train = build_train_example(&h, 10, &mut rng).unwrap();
        assert_eq!(train.target, r(5));
        assert_eq!(train.short_items, vec![r(3)]);
        assert_eq!(train.long_items.len(), 2);
    }

    #[test]
    fn single_item_newest_without_next_falls_back() {
        let h = hist(&[(1, &[1, 2]), (3, &[3])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train = build_train_example(&h, 10, &mut rng).unwrap();
        assert_eq!(train.target, r(3));
        assert_eq!(train.short_items, vec![r(1), r(2)]);
        assert!(train.long_items.is_empty());
    }

    #[test]
    fn fewer_than_two_sessions_excluded() {
        let h = hist(&[(1, &[1, 2, 3])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(build_examples(&h, 10, &mut rng).is_none());
    }

    #[test]
    fn target_never_in_training_short_items() {
        let h = hist(&[(1, &[1, 2]), (2, &[4, 4, 5])]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let train = build_train_example(&h, 10, &mut rng).unwrap();
            assert!(train.short_items.iter().all(|s| s.item != train.target.item));
            assert!(!train.short_items.is_empty() || !train.long_items.is_empty());
        }
    }

    #[test]
    fn long_items_are_last_ten_before_newest() {
        // 6 sessions of 5 items; newest is session index 4, so 20 items precede it
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sessions: Vec<(i64, Vec<usize>)> = (0..6)
            .map(|s| (s as i64 * 3 + rng.gen_range(0..2), (0..5).map(|k| s * 5 + k).collect()))
            .collect();
        let h = UserHistory {
            user: 0,
            sessions: sessions
                .iter()
                .map(|(d, items)| Session {
                    day: *d,
                    items: items.iter().map(|&i| r(i)).collect(),
                })
                .collect(),
        };
        let train = build_train_example(&h, 10, &mut rng).unwrap();
        let flat: Vec<(usize, i64)> = sessions[..4]
            .iter()
            .flat_map(|(d, items)| items.iter().map(move |&i| (i, *d)))
            .collect();
        let expected: Vec<(usize, i64)> = flat[flat.len() - 10..]
            .iter()
            .map(|&(i, d)| (i, sessions[4].0 - d))
            .collect();
        let got: Vec<(usize, i64)> = train.long_items.iter().map(|l| (l.item, l.day_delta)).collect();
        assert_eq!(got, expected);
        assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn user_category_excludes_training_target() {
        // categories: item % 3 + 1 -> items 3,6 are category 1, item 1 is category 2
        let h = hist(&[(1, &[1]), (2, &[3, 6])]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let train = build_train_example(&h, 10, &mut rng).unwrap();
        // one category-1 item removed leaves a tie won by the later category 1
        assert_eq!(train.user_category, 1);
        let h = hist(&[(1, &[1, 4]), (2, &[3, 6])]);
        let train = build_train_example(&h, 10, &mut rng).unwrap();
        assert_eq!(train.user_category, 2);
    }

    #[test]
    fn forced_negative() {
        let history: Vec<usize> = (0..9).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            assert_eq!(sample_negative(&mut rng, &history, 10), 9);
        }
    }

    #[test]
    fn negatives_uniform_over_eligible() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut history: Vec<usize> = (0..100).filter(|i| i % 2 == 0).collect();
        history.sort_unstable();
        let mut counts = vec![0usize; 100];
        let draws = 100_000;
        for _ in 0..draws {
            let s = sample_negative(&mut rng, &history, 100);
            assert!(history.binary_search(&s).is_err());
            counts[s] += 1;
        }
        let expected = draws as f64 / 50.0;
        let chi2: f64 = (0..100)
            .filter(|i| i % 2 == 1)
            .map(|i| (counts[i] as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new(49.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2}, p {p}");
    }
}
