//! Sigmoid cross-entropy with L2 on the touched rows of `U`, `I` and the
//! dense attention parameters.

use super::gradients::Gradients;
use crate::linalg::{axpy, log_sigmoid, sigmoid};
use crate::model::{ModelParams, TensorId};

/// `−[y ln σ(f) + (1−y) ln(1−σ(f))]`, computed through `ln σ` so it never
/// takes `ln 0`.
pub fn sample_loss(score: f64, label: bool) -> f64 {
    if label {
        -log_sigmoid(score)
    } else {
        -log_sigmoid(-score)
    }
}

/// `∂ sample_loss / ∂ score = σ(f) − y`
pub fn score_gradient(score: f64, label: bool) -> f64 {
    sigmoid(score) - if label { 1.0 } else { 0.0 }
}

/// `λ Σ ‖θ‖²` over the user and item rows present in `touched` plus every
/// attention weight and bias.
pub fn l2_penalty(params: &ModelParams, touched: &Gradients, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let rows: f64 = touched
        .user
        .keys()
        .map(|&u| sq(params.user.row(u)))
        .chain(touched.item.keys().map(|&i| sq(params.item.row(i))))
        .sum();
    let dense: f64 = dense_regularized().map(|id| sq(params.tensor(id))).sum();
    lambda * (rows + dense)
}

/// Summed sample losses plus the L2 term over the rows `touched` references.
pub fn loss(samples: &[(f64, bool)], lambda: f64, params: &ModelParams, touched: &Gradients) -> f64 {
    samples.iter().map(|&(s, y)| sample_loss(s, y)).sum::<f64>() + l2_penalty(params, touched, lambda)
}

/// Add `2λθ` to the gradient of every regularized entry.
pub fn add_l2_gradient(grads: &mut Gradients, params: &ModelParams, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (&u, g) in grads.user.iter_mut() {
        axpy(2.0 * lambda, params.user.row(u), g);
    }
    for (&i, g) in grads.item.iter_mut() {
        axpy(2.0 * lambda, params.item.row(i), g);
    }
    for id in dense_regularized() {
        axpy(2.0 * lambda, params.tensor(id), grads.dense_mut(id).expect("dense"));
    }
}

fn dense_regularized() -> impl Iterator<Item = TensorId> {
    TensorId::ALL
        .into_iter()
        .filter(|t| t.regularized() && !matches!(t, TensorId::User | TensorId::Item))
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        assert!((sample_loss(0.0, true) - 2f64.ln()).abs() < 1e-15);
        assert!((sample_loss(0.0, true) - 0.693147).abs() < 1e-6);
        let saturated = sample_loss(50.0, true);
        assert!(saturated.is_finite() && saturated < 1e-20);
        assert!(sample_loss(-800.0, true).is_finite());
        assert!(sample_loss(800.0, false).is_finite());
        assert_eq!(score_gradient(0.0, true), -0.5);
    }

    fn naive(score: f64, y: bool) -> f64 {
        let p = 1.0 / (1.0 + (-score).exp());
        let y = if y { 1.0 } else { 0.0 };
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    }

    proptest! {
        #[test]
        // beyond |f| ≈ 10 the naive 1 − σ(f) loses digits to cancellation
        fn matches_naive_formula(samples in prop::collection::vec((-10.0f64..10.0, any::<bool>()), 1..40)) {
            let stable: f64 = samples.iter().map(|&(s, y)| sample_loss(s, y)).sum();
            let unstable: f64 = samples.iter().map(|&(s, y)| naive(s, y)).sum();
            prop_assume!(unstable.is_finite());
            prop_assert!((stable - unstable).abs() <= 1e-9 * unstable.abs().max(1.0));
        }
    }
}
