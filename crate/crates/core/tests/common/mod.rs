//! Helpers shared by the integration tests: random instances and a naive
//! per-dimension recomputation of both attention layers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlsan::ingest::{Example, ItemRef, LongItem};
use tlsan::linalg::Mat;
use tlsan::model::{HyperParams, ModelParams, TensorId, Variant};

pub const N_USERS: usize = 4;
pub const N_ITEMS: usize = 15;
pub const N_CATEGORIES: usize = 4;

pub fn random_params(rng: &mut ChaCha8Rng, dim: usize, max_long: usize, heads: usize) -> ModelParams {
    let hyper = HyperParams {
        dim,
        max_long,
        heads,
        n_users: N_USERS,
        n_items: N_ITEMS,
        n_categories: N_CATEGORIES,
        variant: Variant::Full,
    };
    let mut p = ModelParams::zeros(hyper).unwrap();
    for id in TensorId::ALL {
        let range = match id {
            TensorId::Position | TensorId::Gamma => 0.5..1.5,
            _ => -1.0..1.0,
        };
        for v in p.tensor_mut(id) {
            *v = rng.gen_range(range.clone());
        }
    }
    p
}

pub fn random_example(rng: &mut ChaCha8Rng, max_long: usize) -> Example {
    let item = |rng: &mut ChaCha8Rng| {
        let i = rng.gen_range(0..N_ITEMS);
        ItemRef { item: i, category: 1 + i % (N_CATEGORIES - 1) }
    };
    let n_long = rng.gen_range(0..=max_long);
    let mut day = rng.gen_range(20..40i64);
    let mut long_items = Vec::new();
    for _ in 0..n_long {
        let r = item(rng);
        long_items.push(LongItem { item: r.item, category: r.category, day_delta: day });
        day -= rng.gen_range(0..=day.min(5));
    }
    let n_short = rng.gen_range(if n_long == 0 { 1 } else { 0 }..4);
    Example {
        user: rng.gen_range(0..N_USERS),
        user_category: rng.gen_range(0..N_CATEGORIES),
        long_items,
        short_items: (0..n_short).map(|_| item(rng)).collect(),
        target: item(rng),
        is_test: false,
    }
}

pub fn instance(seed: u64) -> (ModelParams, Example) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = [2, 4, 6, 8][rng.gen_range(0..4)];
    let divisors: Vec<usize> = (1..=2 * dim).filter(|h| (2 * dim) % h == 0).collect();
    let heads = divisors[rng.gen_range(0..divisors.len())];
    let max_long = rng.gen_range(1..=6);
    let params = random_params(&mut rng, dim, max_long, heads);
    let example = random_example(&mut rng, max_long);
    (params, example)
}

fn embed(table: &Mat, cats: &Mat, row: usize, cat: usize) -> Vec<f64> {
    table.row(row).iter().chain(cats.row(cat)).copied().collect()
}

/// Per-feature loop over `att = Waᵀ relu(Wb x + bb) + ba` restricted to each
/// head's block, followed by a per-feature softmax over positions.
pub fn naive_attention(wa: &Mat, wb: &Mat, ba: &[f64], bb: &[f64], xs: &[Vec<f64>], heads: usize) -> Vec<f64> {
    let width = wa.rows();
    let size = width / heads;
    let mut out = vec![0.0; width];
    for k in 0..width {
        let lo = (k / size) * size;
        let logits: Vec<f64> = xs
            .iter()
            .map(|x| {
                let mut a = ba[k];
                for q in lo..lo + size {
                    let mut z = bb[q];
                    for c in lo..lo + size {
                        z += wb.get(q, c) * x[c];
                    }
                    a += wa.get(q, k) * z.max(0.0);
                }
                a
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for (j, x) in xs.iter().enumerate() {
            out[k] += e[j] / z * x[k];
        }
    }
    out
}

/// `(u_{t-1}, u_t)` computed without any library layer code.
pub fn naive_user_vectors(ex: &Example, p: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let h = p.hyper;
    let width = 2 * h.dim;
    let pad = h.max_long - ex.long_items.len();
    let hs: Vec<Vec<f64>> = ex
        .long_items
        .iter()
        .enumerate()
        .map(|(k, li)| {
            let q = 1.0 / (1.0 + li.day_delta as f64);
            let c = p.gamma * q * p.position.get(ex.user, pad + k);
            embed(&p.item, &p.category, li.item, li.category).iter().map(|v| c * v).collect()
        })
        .collect();
    let u_long = if hs.is_empty() {
        vec![0.0; width]
    } else {
        naive_attention(&p.w1, &p.w2, &p.b1, &p.b2, &hs, h.heads)
    };
    let mut ss = vec![u_long.clone()];
    ss.extend(ex.short_items.iter().map(|s| embed(&p.item, &p.category, s.item, s.category)));
    let ctx = naive_attention(&p.w3, &p.w4, &p.b3, &p.b4, &ss, h.heads);
    let ue = embed(&p.user, &p.category, ex.user, ex.user_category);
    let u = ue.iter().zip(&ctx).map(|(a, b)| a + b).collect();
    (u_long, u)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
