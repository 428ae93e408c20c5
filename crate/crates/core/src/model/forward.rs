//! Forward pass: embeddings, time-aware history, long- and short-term layers
//! and dot-product scoring.

use super::attention::{feature_wise_attention, AttentionCache, AttentionParams};
use super::params::{ModelParams, Variant};
use crate::error::{Error, Result};
use crate::ingest::{Example, ItemRef, LongItem};
use crate::linalg::dot;

fn check_row(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::OutOfRange { what, index, len });
    }
    Ok(())
}

/// `[I(item); C(category)]`
pub fn item_embedding(item: usize, category: usize, params: &ModelParams) -> Result<Vec<f64>> {
    check_row("item", item, params.item.rows())?;
    check_row("category", category, params.category.rows())?;
    let mut out = Vec::with_capacity(params.hyper.width());
    out.extend_from_slice(params.item.row(item));
    out.extend_from_slice(params.category.row(category));
    Ok(out)
}

/// `u_e = [U(user); C(user_category)]`
pub fn user_embedding(user: usize, user_category: usize, params: &ModelParams) -> Result<Vec<f64>> {
    check_row("user", user, params.user.rows())?;
    check_row("category", user_category, params.category.rows())?;
    let mut out = Vec::with_capacity(params.hyper.width());
    out.extend_from_slice(params.user.row(user));
    out.extend_from_slice(params.category.row(user_category));
    Ok(out)
}

/// Fixed reciprocal day decay `1 / (1 + Δdays)`.
pub fn time_decay(day_delta: i64) -> Result<f64> {
    if day_delta < 0 {
        return Err(Error::NegativeDelta(day_delta));
    }
    Ok(1.0 / (1.0 + day_delta as f64))
}

/// One long-term slot. Slots are right-aligned: the newest long-term item
/// occupies slot `max_long - 1`; unused leading slots are masked.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySlot {
    pub item: ItemRef,
    pub decay: f64,
    /// Embedding `l_j`.
    pub embedding: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeAwareHistory {
    /// `max_long` entries, `None` for padding.
    pub slots: Vec<Option<HistorySlot>>,
    /// `h_j = γ · q_j · P[u, j] · l_j`, zero vectors for padding.
    pub h: Vec<Vec<f64>>,
}

impl TimeAwareHistory {
    pub fn mask(&self) -> Vec<bool> {
        self.slots.iter().map(Option::is_some).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }
}

pub fn time_aware_history(user: usize, long_items: &[LongItem], params: &ModelParams) -> Result<TimeAwareHistory> {
    let slots_n = params.hyper.max_long;
    if long_items.len() > slots_n {
        return Err(Error::Shape(format!(
            "{} long-term items for {slots_n} slots",
            long_items.len()
        )));
    }
    check_row("user", user, params.position.rows())?;
    let width = params.hyper.width();
    let pad = slots_n - long_items.len();
    let mut slots = vec![None; pad];
    let mut h = vec![vec![0.0; width]; pad];
    for (k, li) in long_items.iter().enumerate() {
        let slot = pad + k;
        let decay = time_decay(li.day_delta)?;
        let embedding = item_embedding(li.item, li.category, params)?;
        let c = params.gamma * decay * params.position.get(user, slot);
        h.push(embedding.iter().map(|v| c * v).collect());
        slots.push(Some(HistorySlot {
            item: ItemRef {
                item: li.item,
                category: li.category,
            },
            decay,
            embedding,
        }));
    }
    Ok(TimeAwareHistory { slots, h })
}

fn long_params(params: &ModelParams) -> AttentionParams<'_> {
    AttentionParams {
        wa: &params.w1,
        wb: &params.w2,
        ba: &params.b1,
        bb: &params.b2,
    }
}

fn short_params(params: &ModelParams) -> AttentionParams<'_> {
    AttentionParams {
        wa: &params.w3,
        wb: &params.w4,
        ba: &params.b3,
        bb: &params.b4,
    }
}

/// Long-term preference `u_{t-1}`; the zero vector for an empty history.
pub fn long_term_layer(history: &TimeAwareHistory, params: &ModelParams) -> Result<Option<AttentionCache>> {
    if history.is_empty() {
        return Ok(None);
    }
    feature_wise_attention(long_params(params), history.h.clone(), history.mask(), params.hyper.heads).map(Some)
}

/// Short-term layer over `s_0 = u_{t-1}` followed by the session items.
/// Returns the attention cache; `u_t = u_e + cache.context`.
pub fn short_term_layer(short_items: &[ItemRef], u_long: &[f64], params: &ModelParams) -> Result<AttentionCache> {
    if short_items.is_empty() && u_long.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateContext);
    }
    let mut inputs = Vec::with_capacity(short_items.len() + 1);
    inputs.push(u_long.to_vec());
    for s in short_items {
        inputs.push(item_embedding(s.item, s.category, params)?);
    }
    let mask = vec![true; inputs.len()];
    feature_wise_attention(short_params(params), inputs, mask, params.hyper.heads)
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub user: usize,
    pub user_category: usize,
    pub history: TimeAwareHistory,
    pub long: Option<AttentionCache>,
    /// `u_{t-1}`
    pub u_long: Vec<f64>,
    /// `u_{e,t}`
    pub u_embed: Vec<f64>,
    pub short_items: Vec<ItemRef>,
    /// `None` for the no-short-term variant.
    pub short: Option<AttentionCache>,
    /// `u_t`
    pub u: Vec<f64>,
}

/// Current preference `u_t` for an example's inputs (its target is ignored).
pub fn encode(example: &Example, params: &ModelParams) -> Result<ForwardCache> {
    let width = params.hyper.width();
    let u_embed = user_embedding(example.user, example.user_category, params)?;
    let history = time_aware_history(example.user, &example.long_items, params)?;
    let long = long_term_layer(&history, params)?;
    let u_long = long.as_ref().map(|c| c.context.clone()).unwrap_or_else(|| vec![0.0; width]);

    let (short, u) = if params.hyper.variant == Variant::NoShort {
        for s in &example.short_items {
            item_embedding(s.item, s.category, params)?;
        }
        let u = u_embed.iter().zip(&u_long).map(|(a, b)| a + b).collect();
        (None, u)
    } else {
        let cache = short_term_layer(&example.short_items, &u_long, params)?;
        let u = u_embed.iter().zip(&cache.context).map(|(a, b)| a + b).collect();
        (Some(cache), u)
    };

    Ok(ForwardCache {
        user: example.user,
        user_category: example.user_category,
        history,
        long,
        u_long,
        u_embed,
        short_items: example.short_items.clone(),
        short,
        u,
    })
}

/// `f(u_t, j) = u_t · [I(j); C(c_j)]`
pub fn score(u: &[f64], item: usize, category: usize, params: &ModelParams) -> Result<f64> {
    check_row("item", item, params.item.rows())?;
    check_row("category", category, params.category.rows())?;
    let d = params.hyper.dim;
    Ok(dot(&u[..d], params.item.row(item)) + dot(&u[d..], params.category.row(category)))
}

/// Encode the example and score every candidate.
pub fn forward(example: &Example, candidates: &[ItemRef], params: &ModelParams) -> Result<(Vec<f64>, ForwardCache)> {
    let cache = encode(example, params)?;
    let scores = candidates
        .iter()
        .map(|c| score(&cache.u, c.item, c.category, params))
        .collect::<Result<Vec<_>>>()?;
    Ok((scores, cache))
}

#[cfg(test)]
mod tests {
    use super::super::params::HyperParams;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper(dim: usize, max_long: usize, heads: usize) -> HyperParams {
        HyperParams {
            dim,
            max_long,
            heads,
            n_users: 3,
            n_items: 6,
            n_categories: 3,
            variant: Variant::Full,
        }
    }

    fn example() -> Example {
        Example {
            user: 1,
            user_category: 2,
            long_items: vec![
                LongItem { item: 0, category: 1, day_delta: 4 },
                LongItem { item: 2, category: 1, day_delta: 0 },
            ],
            short_items: vec![ItemRef { item: 3, category: 2 }],
            target: ItemRef { item: 4, category: 2 },
            is_test: false,
        }
    }

    #[test]
    fn concatenations() {
        let mut p = ModelParams::zeros(hyper(2, 3, 1)).unwrap();
        assert_eq!(item_embedding(1, 1, &p).unwrap(), vec![0.0; 4]);
        p.item.row_mut(1).copy_from_slice(&[1.0, 2.0]);
        p.category.row_mut(2).copy_from_slice(&[3.0, 4.0]);
        p.user.row_mut(0).copy_from_slice(&[1.0, 2.0]);
        p.category.row_mut(0).copy_from_slice(&[9.0, 9.0]);
        assert_eq!(item_embedding(1, 2, &p).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(user_embedding(0, 2, &p).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        // a different dynamic category only changes the category half; row 0 is the unknown category
        assert_eq!(user_embedding(0, 0, &p).unwrap(), vec![1.0, 2.0, 9.0, 9.0]);
        assert!(matches!(item_embedding(6, 0, &p), Err(Error::OutOfRange { .. })));
        assert!(matches!(user_embedding(0, 3, &p), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn decay_values() {
        assert_eq!(time_decay(0).unwrap(), 1.0);
        assert!((time_decay(9).unwrap() - 0.1).abs() < 1e-15);
        let q: Vec<f64> = [0, 0, 3].iter().map(|&d| time_decay(d).unwrap()).collect();
        assert_eq!(q, vec![1.0, 1.0, 0.25]);
        assert!(matches!(time_decay(-1), Err(Error::NegativeDelta(-1))));
    }

    #[test]
    fn history_product() {
        let mut p = ModelParams::zeros(hyper(2, 2, 1)).unwrap();
        p.item.row_mut(0).copy_from_slice(&[1.0, 2.0]);
        p.category.row_mut(1).copy_from_slice(&[3.0, 4.0]);
        p.position.set(0, 1, 2.0);
        let items = [LongItem { item: 0, category: 1, day_delta: 1 }];
        let h = time_aware_history(0, &items, &p).unwrap();
        assert_eq!(h.mask(), vec![false, true]);
        assert_eq!(h.h[1], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(h.h[0], vec![0.0; 4]);

        p.gamma = 2.0;
        let h2 = time_aware_history(0, &items, &p).unwrap();
        assert_eq!(h2.h[1], vec![2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn empty_history_gives_zero_long_term() {
        let p = ModelParams::init(hyper(2, 3, 1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut ex = example();
        ex.long_items.clear();
        let cache = encode(&ex, &p).unwrap();
        assert!(cache.long.is_none());
        assert_eq!(cache.u_long, vec![0.0; 4]);
    }

    #[test]
    fn short_layer_cases() {
        let p = ModelParams::init(hyper(2, 3, 2), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let u_long = vec![0.3, -0.2, 0.1, 0.5];
        let c = short_term_layer(&[], &u_long, &p).unwrap();
        assert_eq!(c.context, u_long);

        let s = ItemRef { item: 2, category: 1 };
        let e = item_embedding(2, 1, &p).unwrap();
        let c = short_term_layer(&[s], &e, &p).unwrap();
        for (a, b) in c.context.iter().zip(&e) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(short_term_layer(&[], &[0.0; 4], &p), Err(Error::DegenerateContext)));
    }

    #[test]
    fn score_is_dot_product() {
        let mut p = ModelParams::zeros(hyper(2, 3, 1)).unwrap();
        p.item.row_mut(1).copy_from_slice(&[0.0, 1.0]);
        assert_eq!(score(&[0.0, 1.0, 0.0, 0.0], 1, 0, &p).unwrap(), 1.0);
        assert_eq!(score(&[1.0, 0.0, 0.0, 0.0], 1, 0, &p).unwrap(), 0.0);
    }

    #[test]
    fn forward_is_deterministic_and_shaped() {
        let p = ModelParams::init(hyper(4, 3, 2), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ex = example();
        let (s1, c1) = forward(&ex, &[ex.target], &p).unwrap();
        let (s2, c2) = forward(&ex, &[ex.target], &p).unwrap();
        assert_eq!(s1[0].to_bits(), s2[0].to_bits());
        assert_eq!(c1, c2);
        assert_eq!(c1.u.len(), 8);
        assert!(c1.u.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn no_short_variant_adds_long_term_directly() {
        let mut h = hyper(2, 3, 1);
        h.variant = Variant::NoShort;
        let p = ModelParams::init(h, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = encode(&example(), &p).unwrap();
        assert!(c.short.is_none());
        for k in 0..4 {
            assert_eq!(c.u[k], c.u_embed[k] + c.u_long[k]);
        }
    }

    #[test]
    fn too_many_long_items_rejected() {
        let p = ModelParams::zeros(hyper(2, 1, 1)).unwrap();
        let ex = example();
        assert!(matches!(encode(&ex, &p), Err(Error::Shape(_))));
    }
}
