//! Multi-head feature-wise attention.
//!
//! For each position `j`, head `h` works on the contiguous feature block
//! `[h*s, (h+1)*s)` (`s = width / heads`) and computes
//!
//! ```text
//! att_j[blk] = Wa[blk,blk]ᵀ relu(Wb[blk,blk] x_j[blk] + bb[blk]) + ba[blk]
//! ```
//!
//! Weights are a softmax over positions taken separately for every feature
//! dimension, and the context is `Σ_j a_j ⊙ x_j`. Head outputs are laid out in
//! the original feature order, so with one head this is the plain full-width
//! computation.

use crate::error::{Error, Result};
use crate::linalg::{block_matvec, block_matvec_t, softmax_over_positions, Mat};

/// Parameters of one attention block (`Wa`, `Wb`, `ba`, `bb`).
#[derive(Clone, Copy)]
pub struct AttentionParams<'a> {
    pub wa: &'a Mat,
    pub wb: &'a Mat,
    pub ba: &'a [f64],
    pub bb: &'a [f64],
}

/// Everything backprop needs from one attention application.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionCache {
    pub heads: usize,
    pub inputs: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    /// `Wb x + bb` per position (zeros at masked positions).
    pub pre: Vec<Vec<f64>>,
    /// Attention logits per position (zeros at masked positions).
    pub logits: Vec<Vec<f64>>,
    /// `width × positions`
    pub weights: Mat,
    pub context: Vec<f64>,
}

pub fn feature_wise_attention(
    params: AttentionParams<'_>,
    inputs: Vec<Vec<f64>>,
    mask: Vec<bool>,
    heads: usize,
) -> Result<AttentionCache> {
    let width = params.wa.rows();
    if params.wa.shape() != (width, width) || params.wb.shape() != (width, width) {
        return Err(Error::Shape("attention weights must be square and equal".into()));
    }
    if params.ba.len() != width || params.bb.len() != width {
        return Err(Error::Shape("attention bias width mismatch".into()));
    }
    if heads == 0 || !width.is_multiple_of(heads) {
        return Err(Error::Shape(format!("width {width} not divisible by {heads} heads")));
    }
    if inputs.len() != mask.len() {
        return Err(Error::Shape("mask length differs from input count".into()));
    }
    if inputs.iter().any(|x| x.len() != width) {
        return Err(Error::Shape("attention input width mismatch".into()));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }

    let n = inputs.len();
    let size = width / heads;
    let mut pre = vec![vec![0.0; width]; n];
    let mut logits = vec![vec![0.0; width]; n];
    let mut hidden = vec![0.0; size];
    for j in 0..n {
        if !mask[j] {
            continue;
        }
        for h in 0..heads {
            let off = h * size;
            let z = &mut pre[j][off..off + size];
            block_matvec(params.wb, off, &inputs[j][off..off + size], z);
            for (zi, bi) in z.iter_mut().zip(&params.bb[off..off + size]) {
                *zi += bi;
            }
            for (r, &zi) in hidden.iter_mut().zip(z.iter()) {
                *r = if zi > 0.0 { zi } else { 0.0 };
            }
            let a = &mut logits[j][off..off + size];
            block_matvec_t(params.wa, off, &hidden, a);
            for (ai, bi) in a.iter_mut().zip(&params.ba[off..off + size]) {
                *ai += bi;
            }
        }
    }

    let mut scores = Mat::zeros(width, n);
    for (j, l) in logits.iter().enumerate() {
        for (k, &v) in l.iter().enumerate() {
            scores.set(k, j, v);
        }
    }
    let weights = softmax_over_positions(&scores, &mask)?;

    let mut context = vec![0.0; width];
    for (k, c) in context.iter_mut().enumerate() {
        let row = weights.row(k);
        for j in 0..n {
            if mask[j] {
                *c += row[j] * inputs[j][k];
            }
        }
    }

    Ok(AttentionCache {
        heads,
        inputs,
        mask,
        pre,
        logits,
        weights,
        context,
    })
}
