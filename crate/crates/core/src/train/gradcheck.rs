//! Analytic gradients versus central finite differences on a small random
//! instance.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gradients::Gradients;
use super::loss::{add_l2_gradient, l2_penalty, sample_loss};
use super::trainer::{observation_gradients, Observation};
use crate::error::Result;
use crate::ingest::{Example, ItemRef, LongItem};
use crate::model::{encode, forward, HyperParams, ModelParams, TensorId, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub dim: usize,
    pub max_long: usize,
    pub heads: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub lambda: f64,
    /// Finite-difference step.
    pub step: f64,
    /// Entries whose perturbation brings a ReLU input within this distance of
    /// zero (or across it) are skipped.
    pub kink_margin: f64,
    /// Build the instance so every ReLU input sits far from zero.
    pub avoid_kinks: bool,
    pub stencil: Stencil,
    pub variant: Variant,
}

/// Finite-difference formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    /// `(f(x+h) − f(x−h)) / 2h`
    #[default]
    Central,
    /// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`; only meaningful
    /// when the objective is smooth over `[x−2h, x+2h]`.
    FivePoint,
}

impl Stencil {
    /// `(offset, weight)` pairs applied to `f(x + offset·h) − f(x − offset·h)`,
    /// so an entry the objective ignores differences to exactly zero.
    fn pairs(self) -> &'static [(f64, f64)] {
        match self {
            Stencil::Central => &[(1.0, 0.5)],
            Stencil::FivePoint => &[(1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)],
        }
    }
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dim: 4,
            max_long: 3,
            heads: 2,
            n_users: 3,
            n_items: 7,
            n_categories: 3,
            lambda: 0.01,
            step: 1e-5,
            kink_margin: 1e-6,
            avoid_kinks: false,
            stencil: Stencil::Central,
            variant: Variant::Full,
        }
    }
}

impl GradCheckConfig {
    /// Smooth instance (no ReLU input near zero) checked with the
    /// five-point stencil at `h = 1e-3`.
    pub fn kink_free() -> GradCheckConfig {
        GradCheckConfig {
            avoid_kinks: true,
            stencil: Stencil::FivePoint,
            step: 1e-3,
            ..GradCheckConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub tensor: String,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }

    pub fn table(&self) -> String {
        let mut out = format!("seed {}\ntensor  max_rel_error  checked  skipped\n", self.seed);
        for t in &self.tensors {
            let _ = writeln!(out, "{:<7} {:<14.3e} {:<8} {}", t.tensor, t.max_rel_error, t.checked, t.skipped);
        }
        out
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn uniform(rng: &mut ChaCha8Rng, v: &mut [f64], lo: f64, hi: f64) {
    for x in v {
        *x = rng.gen_range(lo..hi);
    }
}

/// Random parameters and one observation with a full long-term history,
/// two short-term items, a positive and two negatives.
pub fn instance(config: &GradCheckConfig, seed: u64) -> Result<(ModelParams, Observation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = HyperParams {
        dim: config.dim,
        max_long: config.max_long,
        heads: config.heads,
        n_users: config.n_users,
        n_items: config.n_items,
        n_categories: config.n_categories,
        variant: config.variant,
    };
    let mut p = ModelParams::init(hyper, &mut rng)?;
    // unit-scale values keep gradients well above the finite-difference noise
    for id in [TensorId::User, TensorId::Item, TensorId::Category] {
        uniform(&mut rng, p.tensor_mut(id), -1.0, 1.0);
    }
    uniform(&mut rng, p.position.data_mut(), 0.5, 1.5);
    p.gamma = rng.gen_range(0.8..1.2);
    for id in [TensorId::W1, TensorId::W2, TensorId::W3, TensorId::W4] {
        uniform(&mut rng, p.tensor_mut(id), -0.8, 0.8);
    }
    for id in [TensorId::B1, TensorId::B2, TensorId::B3, TensorId::B4] {
        uniform(&mut rng, p.tensor_mut(id), -0.3, 0.3);
    }
    if config.avoid_kinks {
        // small inner weights, large-magnitude inner biases: every ReLU
        // input keeps the sign of its bias
        for id in [TensorId::W2, TensorId::W4] {
            for x in p.tensor_mut(id) {
                *x *= 0.05;
            }
        }
        for id in [TensorId::B2, TensorId::B4] {
            for x in p.tensor_mut(id) {
                let m = rng.gen_range(0.5..1.0);
                *x = if rng.gen_bool(0.5) { m } else { -m };
            }
        }
    }

    let cat = |i: usize| i % config.n_categories;
    let item = |rng: &mut ChaCha8Rng| {
        let i = rng.gen_range(0..config.n_items);
        ItemRef { item: i, category: cat(i) }
    };
    let mut deltas: Vec<i64> = (0..config.max_long).map(|_| rng.gen_range(1..8)).collect();
    deltas.sort_unstable_by(|a, b| b.cmp(a));
    let long_items = deltas
        .into_iter()
        .map(|day_delta| {
            let r = item(&mut rng);
            LongItem {
                item: r.item,
                category: r.category,
                day_delta,
            }
        })
        .collect();
    let short_items = vec![item(&mut rng), item(&mut rng)];
    let target = item(&mut rng);
    let candidates = vec![(target, true), (item(&mut rng), false), (item(&mut rng), false)];
    let example = Example {
        user: rng.gen_range(0..config.n_users),
        user_category: rng.gen_range(0..config.n_categories),
        long_items,
        short_items,
        target,
        is_test: false,
    };
    Ok((p, Observation { example, candidates }))
}

/// Full objective of one observation: data loss plus L2 over `touched`.
fn objective(obs: &Observation, params: &ModelParams, touched: &Gradients, lambda: f64) -> Result<f64> {
    let refs: Vec<ItemRef> = obs.candidates.iter().map(|c| c.0).collect();
    let (scores, _) = forward(&obs.example, &refs, params)?;
    let data: f64 = scores
        .iter()
        .zip(&obs.candidates)
        .map(|(&s, &(_, y))| sample_loss(s, y))
        .sum();
    Ok(data + l2_penalty(params, touched, lambda))
}

/// Every ReLU input of the forward pass.
fn relu_inputs(example: &Example, params: &ModelParams) -> Result<Vec<f64>> {
    let cache = encode(example, params)?;
    let mut out = Vec::new();
    for att in cache.long.iter().chain(cache.short.iter()) {
        for (pre, &m) in att.pre.iter().zip(&att.mask) {
            if m {
                out.extend_from_slice(pre);
            }
        }
    }
    Ok(out)
}

fn near_kink(base: &[f64], moved: &[f64], margin: f64) -> bool {
    base.iter()
        .zip(moved)
        .any(|(&a, &b)| a.abs() < margin || b.abs() < margin || (a > 0.0) != (b > 0.0))
}

pub fn grad_check(config: &GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    grad_check_with(config, seed, |_| {})
}

/// As [`grad_check`], with `tamper` applied to the analytic gradient before
/// comparison (to confirm the harness notices broken gradients).
pub fn grad_check_with<F: Fn(&mut Gradients)>(config: &GradCheckConfig, seed: u64, tamper: F) -> Result<GradCheckReport> {
    let (mut params, obs) = instance(config, seed)?;
    let mut grads = Gradients::new(&params.hyper);
    observation_gradients(&obs, &params, &mut grads)?;
    add_l2_gradient(&mut grads, &params, config.lambda);
    tamper(&mut grads);

    let base_relu = relu_inputs(&obs.example, &params)?;
    let h = config.step;
    let mut tensors = Vec::with_capacity(TensorId::ALL.len());
    for id in TensorId::ALL {
        let analytic = grads.to_dense(id, &params);
        let mut check = TensorCheck {
            tensor: id.name().to_string(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            checked: 0,
            skipped: 0,
        };
        for (k, &a) in analytic.iter().enumerate() {
            let orig = params.tensor(id)[k];
            let (mut n, mut kink) = (0.0, false);
            for &(offset, weight) in config.stencil.pairs() {
                let mut side = |sign: f64| -> Result<f64> {
                    params.tensor_mut(id)[k] = orig + sign * offset * h;
                    kink |= near_kink(&base_relu, &relu_inputs(&obs.example, &params)?, config.kink_margin);
                    objective(&obs, &params, &grads, config.lambda)
                };
                let up = side(1.0)?;
                let down = side(-1.0)?;
                n += weight * (up - down);
            }
            params.tensor_mut(id)[k] = orig;
            if kink {
                check.skipped += 1;
                continue;
            }
            n /= h;
            let rel = relative_error(a, n);
            check.checked += 1;
            if rel > check.max_rel_error || check.checked == 1 {
                check.max_rel_error = rel;
                check.worst_index = k;
                check.analytic = a;
                check.numeric = n;
            }
        }
        tensors.push(check);
    }
    Ok(GradCheckReport { seed, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_instance_passes() {
        let r = grad_check(&GradCheckConfig::default(), 7).unwrap();
        assert!(r.passed(1e-4), "{}", r.table());
        assert!(r.tensors.iter().all(|t| t.checked > 0));
    }

    #[test]
    fn kink_free_instance_is_tighter() {
        let config = GradCheckConfig::kink_free();
        let r = grad_check(&config, 3).unwrap();
        assert!(r.tensors.iter().all(|t| t.skipped == 0), "{}", r.table());
        assert!(r.passed(1e-6), "{}", r.table());
    }

    #[test]
    fn corrupted_w3_gradient_is_caught() {
        let r = grad_check_with(&GradCheckConfig::default(), 7, |g| {
            for x in g.w3.data_mut() {
                *x *= 1.5;
            }
        })
        .unwrap();
        assert!(!r.passed(1e-4));
        let worst = r.tensors.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)).unwrap();
        assert_eq!(worst.tensor, "W3");
    }

    #[test]
    fn every_variant_passes() {
        for variant in [Variant::NoShort, Variant::NoGamma, Variant::NoPosition] {
            let config = GradCheckConfig {
                variant,
                ..GradCheckConfig::default()
            };
            let r = grad_check(&config, 5).unwrap();
            assert!(r.passed(1e-4), "{variant}: {}", r.table());
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
