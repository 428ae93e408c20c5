//! AUC, Precision@K and Recall@K, full-catalog ranking and a popularity
//! reference ranker.
//!
//! Means over users are taken after sorting the per-user values, so every
//! metric is independent of the order users are evaluated in.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{sample_negative, Dataset, Example, UserHistory};
use crate::linalg::dot;
use crate::model::{encode, ModelParams};

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 20];

/// Scores of one user's positive and negative candidates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserScores {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AucOutcome {
    pub auc: f64,
    pub users: usize,
    /// Users lacking a positive or a negative.
    pub excluded: usize,
}

fn order_free_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values.into_iter().sum::<f64>() / n
}

/// Mean over users of the fraction of (positive, negative) pairs ordered
/// strictly correctly. Ties count as wrong.
pub fn auc(users: &[UserScores]) -> AucOutcome {
    let mut fractions = Vec::with_capacity(users.len());
    let mut excluded = 0;
    for u in users {
        if u.positives.is_empty() || u.negatives.is_empty() {
            excluded += 1;
            continue;
        }
        let mut neg = u.negatives.clone();
        neg.sort_by(f64::total_cmp);
        // negatives strictly below each positive
        let correct: usize = u.positives.iter().map(|&p| neg.partition_point(|&n| n < p)).sum();
        fractions.push(correct as f64 / (u.positives.len() * u.negatives.len()) as f64);
    }
    AucOutcome {
        users: fractions.len(),
        auc: order_free_mean(fractions),
        excluded,
    }
}

/// Brute-force pairwise AUC with the same strict rule as [`auc`].
pub fn auc_oracle(users: &[UserScores]) -> f64 {
    let mut fractions = Vec::new();
    for u in users {
        if u.positives.is_empty() || u.negatives.is_empty() {
            continue;
        }
        let mut correct = 0usize;
        for &p in &u.positives {
            for &n in &u.negatives {
                if p > n {
                    correct += 1;
                }
            }
        }
        fractions.push(correct as f64 / (u.positives.len() * u.negatives.len()) as f64);
    }
    order_free_mean(fractions)
}

/// Indices of the `k` best scores, descending, ties by ascending index;
/// `exclude` items never appear.
pub fn top_k(scores: &[f64], exclude: &[usize], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|i| !exclude.contains(i)).collect();
    let by_rank = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, by_rank);
        idx.truncate(k);
    }
    idx.sort_by(by_rank);
    idx
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

/// `precision@K = mean hits/K`, `recall@K = mean hits/|pos(u)|`.
pub fn precision_recall_at_k(ranked: &[Vec<usize>], truth: &[Vec<usize>], ks: &[usize]) -> Vec<AtK> {
    assert_eq!(ranked.len(), truth.len(), "one ranking per user");
    ks.iter()
        .map(|&k| {
            let (mut ps, mut rs) = (Vec::new(), Vec::new());
            for (list, pos) in ranked.iter().zip(truth) {
                let hits = list.iter().take(k).filter(|i| pos.contains(i)).count() as f64;
                ps.push(hits / k as f64);
                rs.push(if pos.is_empty() { 0.0 } else { hits / pos.len() as f64 });
            }
            AtK {
                k,
                precision: order_free_mean(ps),
                recall: order_free_mean(rs),
            }
        })
        .collect()
}

/// Anything that can score the whole catalog for an example's context.
pub trait CatalogScorer: Sync {
    fn catalog_scores(&self, example: &Example) -> Result<Vec<f64>>;
}

/// Model scores `u_t · [I(j); C(c_j)]` for every item.
pub struct ModelScorer<'a> {
    pub params: &'a ModelParams,
    pub item_categories: &'a [usize],
}

impl CatalogScorer for ModelScorer<'_> {
    fn catalog_scores(&self, example: &Example) -> Result<Vec<f64>> {
        let cache = encode(example, self.params)?;
        let d = self.params.hyper.dim;
        let (ui, uc) = cache.u.split_at(d);
        let cat_scores: Vec<f64> = (0..self.params.category.rows())
            .map(|c| dot(uc, self.params.category.row(c)))
            .collect();
        Ok((0..self.params.item.rows())
            .map(|i| dot(ui, self.params.item.row(i)) + cat_scores[self.item_categories[i]])
            .collect())
    }
}

/// Top `k_max` `(item, score)` pairs, never re-recommending the example's
/// short-term session items.
pub fn rank_catalog(example: &Example, params: &ModelParams, item_categories: &[usize], k_max: usize) -> Result<Vec<(usize, f64)>> {
    let scores = ModelScorer { params, item_categories }.catalog_scores(example)?;
    let exclude: Vec<usize> = example.short_items.iter().map(|s| s.item).collect();
    Ok(top_k(&scores, &exclude, k_max).into_iter().map(|i| (i, scores[i])).collect())
}

/// Global popularity ranking by interaction count.
#[derive(Clone, Debug, PartialEq)]
pub struct Popularity {
    pub counts: Vec<usize>,
}

impl Popularity {
    /// Items ordered by count descending, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.counts.len()).collect();
        idx.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        idx
    }
}

pub fn popularity_baseline(histories: &[UserHistory], n_items: usize) -> Popularity {
    let mut counts = vec![0usize; n_items];
    for h in histories {
        for (_, r) in h.flatten() {
            counts[r.item] += 1;
        }
    }
    Popularity { counts }
}

impl CatalogScorer for Popularity {
    fn catalog_scores(&self, _example: &Example) -> Result<Vec<f64>> {
        Ok(self.counts.iter().map(|&c| c as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Seed for the sampled AUC negatives.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: DEFAULT_KS.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub at_k: Vec<AtK>,
    pub users: usize,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<AtK> {
        self.at_k.iter().copied().find(|a| a.k == k)
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("users,auc");
        for a in &self.at_k {
            let _ = write!(h, ",precision@{k},recall@{k}", k = a.k);
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = format!("{},{:.6}", self.users, self.auc);
        for a in &self.at_k {
            let _ = write!(r, ",{:.6},{:.6}", a.precision, a.recall);
        }
        r
    }

    pub fn table(&self) -> String {
        let mut t = format!("users      {}\nAUC        {:.4}\n", self.users, self.auc);
        t.push_str("K     Precision@K  Recall@K\n");
        for a in &self.at_k {
            let _ = writeln!(t, "{:<5} {:<12.4} {:.4}", a.k, a.precision, a.recall);
        }
        t
    }
}

fn negative_rng(seed: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64);
    rng
}

/// AUC (one sampled negative per positive) plus full-catalog P@K/R@K.
///
/// Negatives are drawn uniformly from items outside the user's whole
/// history, with a per-user stream of `config.seed`.
pub fn evaluate<S: CatalogScorer + ?Sized>(
    examples: &[Example],
    scorer: &S,
    dataset: &Dataset,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let k_max = config.ks.iter().copied().max().unwrap_or(0);
    let n_items = dataset.n_items();
    let per_user: Vec<(UserScores, Vec<usize>)> = examples
        .par_iter()
        .map(|ex| {
            let scores = scorer.catalog_scores(ex)?;
            let seen = dataset.histories[ex.user].item_set();
            let mut user = UserScores {
                positives: vec![scores[ex.target.item]],
                negatives: Vec::new(),
            };
            if seen.len() < n_items {
                let mut rng = negative_rng(config.seed, ex.user);
                user.negatives.push(scores[sample_negative(&mut rng, &seen, n_items)]);
            }
            let exclude: Vec<usize> = ex.short_items.iter().map(|s| s.item).collect();
            Ok((user, top_k(&scores, &exclude, k_max)))
        })
        .collect::<Result<Vec<_>>>()?;

    let (users, ranked): (Vec<UserScores>, Vec<Vec<usize>>) = per_user.into_iter().unzip();
    let truth: Vec<Vec<usize>> = examples.iter().map(|e| vec![e.target.item]).collect();
    Ok(EvalReport {
        auc: auc(&users).auc,
        at_k: precision_recall_at_k(&ranked, &truth, &config.ks),
        users: examples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn us(pos: &[f64], neg: &[f64]) -> UserScores {
        UserScores {
            positives: pos.to_vec(),
            negatives: neg.to_vec(),
        }
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[us(&[0.9], &[0.1])]).auc, 1.0);
        assert_eq!(auc(&[us(&[0.5], &[0.5])]).auc, 0.0);
        assert_eq!(auc(&[us(&[0.8, 0.4], &[0.6, 0.2])]).auc, 0.75);
        assert_eq!(auc_oracle(&[us(&[0.5], &[0.5])]), 0.0);
        let out = auc(&[us(&[0.9], &[]), us(&[0.9], &[0.1])]);
        assert_eq!((out.users, out.excluded, out.auc), (1, 1, 1.0));
    }

    #[test]
    fn auc_order_independent() {
        let a = [us(&[0.3, 0.9], &[0.5]), us(&[0.1], &[0.2, 0.0, 0.05]), us(&[0.7], &[0.7])];
        let b = [a[2].clone(), a[0].clone(), a[1].clone()];
        assert_eq!(auc(&a).auc.to_bits(), auc(&b).auc.to_bits());
        assert_eq!(auc_oracle(&a).to_bits(), auc_oracle(&b).to_bits());
    }

    #[test]
    fn top_k_rules() {
        let scores = [0.5, 0.9, 0.5, 0.1];
        assert_eq!(top_k(&scores, &[], 3), vec![1, 0, 2]);
        assert_eq!(top_k(&scores, &[1], 10), vec![0, 2, 3]);
        assert_eq!(top_k(&scores, &[], 0), Vec::<usize>::new());
    }

    #[test]
    fn precision_recall_cases() {
        let ranked = vec![vec![4, 2, 7, 1, 3, 9]];
        let at = precision_recall_at_k(&ranked, &[vec![7]], &[5]);
        assert!((at[0].precision - 0.2).abs() < 1e-15);
        assert_eq!(at[0].recall, 1.0);
        let at = precision_recall_at_k(&ranked, &[vec![9]], &[5]);
        assert_eq!((at[0].precision, at[0].recall), (0.0, 0.0));
    }

    #[test]
    fn popularity_order() {
        let p = Popularity { counts: vec![3, 5, 3, 0] };
        assert_eq!(p.ranking(), vec![1, 0, 2, 3]);
    }

    fn ranking_instance() -> impl Strategy<Value = (Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        prop::collection::vec((Just((0..30).collect::<Vec<usize>>()).prop_shuffle(), 0usize..30), 1..20)
            .prop_map(|v| v.into_iter().map(|(r, t)| (r, vec![t])).unzip())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn auc_equals_oracle(users in prop::collection::vec(
            (prop::collection::vec(-5i32..5, 0..8), prop::collection::vec(-5i32..5, 0..8)), 1..12)) {
            let users: Vec<UserScores> = users.into_iter().map(|(p, n)| UserScores {
                positives: p.into_iter().map(|v| v as f64 / 2.0).collect(),
                negatives: n.into_iter().map(|v| v as f64 / 2.0).collect(),
            }).collect();
            prop_assert_eq!(auc(&users).auc.to_bits(), auc_oracle(&users).to_bits());
        }

        #[test]
        fn precision_recall_monotone_in_k((ranked, truth) in ranking_instance()) {
            let ks: Vec<usize> = (1..=30).collect();
            let at = precision_recall_at_k(&ranked, &truth, &ks);
            // precision only falls once every positive has been reached
            let last_hit = ranked
                .iter()
                .zip(&truth)
                .map(|(r, t)| r.iter().position(|i| t.contains(i)).map_or(0, |p| p + 1))
                .max()
                .unwrap();
            for w in at.windows(2) {
                prop_assert!(w[1].recall >= w[0].recall - 1e-15);
                let hits = |a: &AtK| a.precision * a.k as f64;
                prop_assert!(hits(&w[1]) >= hits(&w[0]) - 1e-12);
                if w[0].k >= last_hit {
                    prop_assert!(w[1].precision <= w[0].precision + 1e-15);
                }
            }
            for a in &at {
                prop_assert!((a.recall - a.k as f64 * a.precision).abs() < 1e-12);
            }
        }

        #[test]
        fn metrics_rank_invariant(raw in prop::collection::vec(-20i32..20, 10..40), target in 0usize..10, neg in 0usize..10) {
            let scores: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
            // strictly increasing and exact on small integers
            let mapped: Vec<f64> = scores.iter().map(|&x| x * x * x + 2.0 * x + 7.0).collect();
            let users = |s: &[f64]| vec![UserScores { positives: vec![s[target]], negatives: vec![s[neg]] }];
            prop_assert_eq!(auc(&users(&scores)).auc, auc(&users(&mapped)).auc);
            let truth = vec![vec![target]];
            let ks = [1, 3, 5];
            prop_assert_eq!(
                precision_recall_at_k(&[top_k(&scores, &[], 5)], &truth, &ks),
                precision_recall_at_k(&[top_k(&mapped, &[], 5)], &truth, &ks)
            );
        }
    }
}
