//! Small dense kernel used by the model: row-major matrices, matrix-vector
//! products, activations, masked column-wise softmax and seeded initialization.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. Non-finite results are caught by
//! `debug_assert!`s in debug builds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `M · v`.
pub fn matvec(m: &Mat, v: &[f64]) -> Result<Vec<f64>> {
    if m.cols != v.len() {
        return Err(Error::Shape(format!(
            "matvec: {}x{} matrix with vector of length {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let out: Vec<f64> = (0..m.rows).map(|r| dot(m.row(r), v)).collect();
    debug_assert!(out.iter().all(|x| x.is_finite()), "matvec produced non-finite output");
    Ok(out)
}

/// `Mᵀ · v`.
pub fn matvec_t(m: &Mat, v: &[f64]) -> Result<Vec<f64>> {
    if m.rows != v.len() {
        return Err(Error::Shape(format!(
            "matvec_t: {}x{} matrix with vector of length {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let mut out = vec![0.0; m.cols];
    for (r, &vr) in v.iter().enumerate() {
        axpy(vr, m.row(r), &mut out);
    }
    Ok(out)
}

/// Square block of `m` starting at `(off, off)` applied to `x`: `out = M[off.., off..] · x`.
#[inline]
pub(crate) fn block_matvec(m: &Mat, off: usize, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (p, o) in out.iter_mut().enumerate() {
        let row = &m.data[(off + p) * m.cols + off..(off + p) * m.cols + off + n];
        *o = dot(row, x);
    }
}

/// Transposed square block: `out = M[off.., off..]ᵀ · x`.
#[inline]
pub(crate) fn block_matvec_t(m: &Mat, off: usize, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (q, &xq) in x.iter().enumerate() {
        let row = &m.data[(off + q) * m.cols + off..(off + q) * m.cols + off + n];
        axpy(xq, row, out);
    }
}

/// Rank-one update of a square block: `M[off+p, off+q] += a[p] * b[q]`.
#[inline]
pub(crate) fn block_outer_add(m: &mut Mat, off: usize, a: &[f64], b: &[f64]) {
    let cols = m.cols;
    for (p, &ap) in a.iter().enumerate() {
        if ap == 0.0 {
            continue;
        }
        let row = &mut m.data[(off + p) * cols + off..(off + p) * cols + off + b.len()];
        axpy(ap, b, row);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without forming `σ(x)`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Softmax over the columns (positions) of each row (feature dimension) of a
/// `D×J` score matrix. Masked-out columns (`mask[j] == false`) get weight 0.
pub fn softmax_over_positions(scores: &Mat, mask: &[bool]) -> Result<Mat> {
    if mask.len() != scores.cols {
        return Err(Error::Shape(format!(
            "mask of length {} for {} positions",
            mask.len(),
            scores.cols
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    let mut out = Mat::zeros(scores.rows, scores.cols);
    for k in 0..scores.rows {
        let row = scores.row(k);
        let max = row
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let out_row = out.row_mut(k);
        let mut total = 0.0;
        for j in 0..row.len() {
            if mask[j] {
                let e = (row[j] - max).exp();
                out_row[j] = e;
                total += e;
            }
        }
        for w in out_row.iter_mut() {
            *w /= total;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// uniform(−a, a), a = sqrt(6 / (rows + cols))
    Glorot,
    /// uniform(−0.5/dim, 0.5/dim)
    Embedding { dim: usize },
    Zeros,
    Constant(f64),
}

pub fn init_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scheme: InitScheme) -> Mat {
    match scheme {
        InitScheme::Glorot => {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            uniform_mat(rng, rows, cols, a)
        }
        InitScheme::Embedding { dim } => uniform_mat(rng, rows, cols, 0.5 / dim as f64),
        InitScheme::Zeros => Mat::zeros(rows, cols),
        InitScheme::Constant(c) => Mat::filled(rows, cols, c),
    }
}

fn uniform_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, a: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Mat { rows, cols, data }
}
