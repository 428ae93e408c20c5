//! Reverse pass through scoring, the short- and long-term attention layers
//! and the time-aware history product.

use super::gradients::Gradients;
use crate::error::{Error, Result};
use crate::ingest::ItemRef;
use crate::linalg::{axpy, block_matvec, block_matvec_t, block_outer_add, dot, Mat};
use crate::model::{AttentionCache, AttentionParams, ForwardCache, ModelParams};

/// Gradient buffers for one attention block.
pub(crate) struct AttentionGrads<'a> {
    pub wa: &'a mut Mat,
    pub wb: &'a mut Mat,
    pub ba: &'a mut [f64],
    pub bb: &'a mut [f64],
}

/// Backpropagate `dcontext` through one feature-wise attention application.
/// Accumulates parameter gradients and returns the gradient for every input
/// position (zero at masked positions).
pub(crate) fn attention_backward(
    cache: &AttentionCache,
    params: AttentionParams<'_>,
    dcontext: &[f64],
    grads: AttentionGrads<'_>,
) -> Vec<Vec<f64>> {
    let width = dcontext.len();
    let n = cache.inputs.len();
    let size = width / cache.heads;
    let w = &cache.weights;

    let mut dinputs = vec![vec![0.0; width]; n];
    // dL/d logits, per position
    let mut dlogits = vec![vec![0.0; width]; n];
    for k in 0..width {
        // softmax Jacobian per feature: dz_j = a_j (g_j − Σ_i a_i g_i), g_j = dctx x_j
        let mut weighted = 0.0;
        for j in 0..n {
            if cache.mask[j] {
                weighted += w.get(k, j) * dcontext[k] * cache.inputs[j][k];
            }
        }
        for j in 0..n {
            if cache.mask[j] {
                let a = w.get(k, j);
                dinputs[j][k] = a * dcontext[k];
                dlogits[j][k] = a * (dcontext[k] * cache.inputs[j][k] - weighted);
            }
        }
    }

    let mut hidden = vec![0.0; size];
    let mut dhidden = vec![0.0; size];
    let mut dx = vec![0.0; size];
    for j in 0..n {
        if !cache.mask[j] {
            continue;
        }
        for h in 0..cache.heads {
            let off = h * size;
            let z = &cache.pre[j][off..off + size];
            let datt = &dlogits[j][off..off + size];
            axpy(1.0, datt, &mut grads.ba[off..off + size]);
            for (r, &zi) in hidden.iter_mut().zip(z) {
                *r = if zi > 0.0 { zi } else { 0.0 };
            }
            // att = Waᵀ r: dWa[q, p] += r[q] datt[p], dr = Wa datt
            block_outer_add(grads.wa, off, &hidden, datt);
            block_matvec(params.wa, off, datt, &mut dhidden);
            // relu subgradient is 0 at 0
            for (g, &zi) in dhidden.iter_mut().zip(z) {
                if zi <= 0.0 {
                    *g = 0.0;
                }
            }
            axpy(1.0, &dhidden, &mut grads.bb[off..off + size]);
            block_outer_add(grads.wb, off, &dhidden, &cache.inputs[j][off..off + size]);
            block_matvec_t(params.wb, off, &dhidden, &mut dx);
            axpy(1.0, &dx, &mut dinputs[j][off..off + size]);
        }
    }
    dinputs
}

/// Accumulate the gradient of `Σ_c dscore_c · f(u_t, c)` into `grads`.
///
/// `dscores` pairs each scored candidate with `∂L/∂score`.
pub fn backward(
    cache: &ForwardCache,
    dscores: &[(ItemRef, f64)],
    params: &ModelParams,
    grads: &mut Gradients,
) -> Result<()> {
    let width = params.hyper.width();
    let d = params.hyper.dim;
    if cache.u.len() != width || cache.u_long.len() != width {
        return Err(Error::Shape(format!(
            "forward cache width {} does not match parameters ({width})",
            cache.u.len()
        )));
    }
    for (c, _) in dscores {
        if c.item >= params.item.rows() || c.category >= params.category.rows() {
            return Err(Error::Shape(format!("candidate {c:?} outside the catalog")));
        }
    }

    // scores
    let mut du = vec![0.0; width];
    for &(c, g) in dscores {
        axpy(g, params.item.row(c.item), &mut du[..d]);
        axpy(g, params.category.row(c.category), &mut du[d..]);
        let scaled: Vec<f64> = cache.u.iter().map(|v| g * v).collect();
        grads.add_item_embedding(c.item, c.category, &scaled);
    }

    // u_t = u_e + (short context | u_{t-1})
    axpy(1.0, &du[..d], grads.user_row(cache.user));
    axpy(1.0, &du[d..], grads.category_row(cache.user_category));

    let du_long = match &cache.short {
        Some(short) => {
            let sp = AttentionParams {
                wa: &params.w3,
                wb: &params.w4,
                ba: &params.b3,
                bb: &params.b4,
            };
            let ag = AttentionGrads {
                wa: &mut grads.w3,
                wb: &mut grads.w4,
                ba: &mut grads.b3,
                bb: &mut grads.b4,
            };
            let mut dinputs = attention_backward(short, sp, &du, ag);
            for (s, g) in cache.short_items.iter().zip(&dinputs[1..]) {
                grads.add_item_embedding(s.item, s.category, g);
            }
            std::mem::take(&mut dinputs[0])
        }
        None => du,
    };

    let Some(long) = &cache.long else {
        return Ok(());
    };
    let lp = AttentionParams {
        wa: &params.w1,
        wb: &params.w2,
        ba: &params.b1,
        bb: &params.b2,
    };
    let ag = AttentionGrads {
        wa: &mut grads.w1,
        wb: &mut grads.w2,
        ba: &mut grads.b1,
        bb: &mut grads.b2,
    };
    let dh = attention_backward(long, lp, &du_long, ag);

    // h_j = γ q_j P[u, j] l_j
    grads.position_row(cache.user);
    for (j, slot) in cache.history.slots.iter().enumerate() {
        let Some(slot) = slot else { continue };
        let p = params.position.get(cache.user, j);
        let along = dot(&dh[j], &slot.embedding);
        grads.position_row(cache.user)[j] += params.gamma * slot.decay * along;
        grads.gamma += slot.decay * p * along;
        let c = params.gamma * slot.decay * p;
        let dl: Vec<f64> = dh[j].iter().map(|v| c * v).collect();
        grads.add_item_embedding(slot.item.item, slot.item.category, &dl);
    }
    Ok(())
}
