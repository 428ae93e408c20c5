use std::collections::BTreeMap;

use crate::linalg::{axpy, Mat};
use crate::model::{HyperParams, ModelParams, TensorId};

/// Gradient buffers: dense for the attention weights and γ, sparse row maps
/// for the embedding tables and position weights. A row key is present
/// whenever the row took part in the forward pass, even if its gradient is
/// zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub user: BTreeMap<usize, Vec<f64>>,
    pub item: BTreeMap<usize, Vec<f64>>,
    pub category: BTreeMap<usize, Vec<f64>>,
    pub position: BTreeMap<usize, Vec<f64>>,
    pub gamma: f64,
    pub w1: Mat,
    pub w2: Mat,
    pub w3: Mat,
    pub w4: Mat,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub b3: Vec<f64>,
    pub b4: Vec<f64>,
    dim: usize,
    max_long: usize,
}

impl Gradients {
    pub fn new(hyper: &HyperParams) -> Gradients {
        let w = hyper.width();
        Gradients {
            user: BTreeMap::new(),
            item: BTreeMap::new(),
            category: BTreeMap::new(),
            position: BTreeMap::new(),
            gamma: 0.0,
            w1: Mat::zeros(w, w),
            w2: Mat::zeros(w, w),
            w3: Mat::zeros(w, w),
            w4: Mat::zeros(w, w),
            b1: vec![0.0; w],
            b2: vec![0.0; w],
            b3: vec![0.0; w],
            b4: vec![0.0; w],
            dim: hyper.dim,
            max_long: hyper.max_long,
        }
    }

    pub(crate) fn user_row(&mut self, row: usize) -> &mut Vec<f64> {
        let d = self.dim;
        self.user.entry(row).or_insert_with(|| vec![0.0; d])
    }

    pub(crate) fn item_row(&mut self, row: usize) -> &mut Vec<f64> {
        let d = self.dim;
        self.item.entry(row).or_insert_with(|| vec![0.0; d])
    }

    pub(crate) fn category_row(&mut self, row: usize) -> &mut Vec<f64> {
        let d = self.dim;
        self.category.entry(row).or_insert_with(|| vec![0.0; d])
    }

    pub(crate) fn position_row(&mut self, row: usize) -> &mut Vec<f64> {
        let n = self.max_long;
        self.position.entry(row).or_insert_with(|| vec![0.0; n])
    }

    /// `[dI(item); dC(category)] += g`
    pub(crate) fn add_item_embedding(&mut self, item: usize, category: usize, g: &[f64]) {
        let d = self.dim;
        axpy(1.0, &g[..d], self.item_row(item));
        axpy(1.0, &g[d..], self.category_row(category));
    }

    pub(crate) fn sparse(&self, id: TensorId) -> Option<&BTreeMap<usize, Vec<f64>>> {
        match id {
            TensorId::User => Some(&self.user),
            TensorId::Item => Some(&self.item),
            TensorId::Category => Some(&self.category),
            TensorId::Position => Some(&self.position),
            _ => None,
        }
    }

    /// Dense view of a non-sparse tensor's gradient.
    pub(crate) fn dense(&self, id: TensorId) -> Option<&[f64]> {
        Some(match id {
            TensorId::Gamma => std::slice::from_ref(&self.gamma),
            TensorId::W1 => self.w1.data(),
            TensorId::W2 => self.w2.data(),
            TensorId::W3 => self.w3.data(),
            TensorId::W4 => self.w4.data(),
            TensorId::B1 => &self.b1,
            TensorId::B2 => &self.b2,
            TensorId::B3 => &self.b3,
            TensorId::B4 => &self.b4,
            _ => return None,
        })
    }

    pub(crate) fn dense_mut(&mut self, id: TensorId) -> Option<&mut [f64]> {
        Some(match id {
            TensorId::Gamma => std::slice::from_mut(&mut self.gamma),
            TensorId::W1 => self.w1.data_mut(),
            TensorId::W2 => self.w2.data_mut(),
            TensorId::W3 => self.w3.data_mut(),
            TensorId::W4 => self.w4.data_mut(),
            TensorId::B1 => &mut self.b1,
            TensorId::B2 => &mut self.b2,
            TensorId::B3 => &mut self.b3,
            TensorId::B4 => &mut self.b4,
            _ => return None,
        })
    }

    /// Full gradient of one tensor laid out like `params.tensor(id)`.
    pub fn to_dense(&self, id: TensorId, params: &ModelParams) -> Vec<f64> {
        match self.sparse(id) {
            Some(rows) => {
                let (r, c) = ModelParams::expected_shape(&params.hyper, id);
                let mut out = vec![0.0; r * c];
                for (&row, g) in rows {
                    out[row * c..(row + 1) * c].copy_from_slice(g);
                }
                out
            }
            None => self.dense(id).expect("dense tensor").to_vec(),
        }
    }

    /// Reset to an empty gradient without releasing the dense buffers.
    pub fn clear(&mut self) {
        self.user.clear();
        self.item.clear();
        self.category.clear();
        self.position.clear();
        self.gamma = 0.0;
        for m in [&mut self.w1, &mut self.w2, &mut self.w3, &mut self.w4] {
            m.data_mut().fill(0.0);
        }
        for b in [&mut self.b1, &mut self.b2, &mut self.b3, &mut self.b4] {
            b.fill(0.0);
        }
    }

    /// `self *= factor`
    pub fn scale(&mut self, factor: f64) {
        for m in [&mut self.user, &mut self.item, &mut self.category, &mut self.position] {
            for row in m.values_mut() {
                row.iter_mut().for_each(|v| *v *= factor);
            }
        }
        self.gamma *= factor;
        for m in [&mut self.w1, &mut self.w2, &mut self.w3, &mut self.w4] {
            m.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
        for b in [&mut self.b1, &mut self.b2, &mut self.b3, &mut self.b4] {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += other`
    pub fn accumulate(&mut self, other: &Gradients) {
        for (dst, src) in [
            (&mut self.user, &other.user),
            (&mut self.item, &other.item),
            (&mut self.category, &other.category),
            (&mut self.position, &other.position),
        ] {
            for (&row, g) in src {
                match dst.get_mut(&row) {
                    Some(d) => axpy(1.0, g, d),
                    None => {
                        dst.insert(row, g.clone());
                    }
                }
            }
        }
        for id in [
            TensorId::Gamma,
            TensorId::W1,
            TensorId::W2,
            TensorId::W3,
            TensorId::W4,
            TensorId::B1,
            TensorId::B2,
            TensorId::B3,
            TensorId::B4,
        ] {
            let src = other.dense(id).expect("dense");
            axpy(1.0, src, self.dense_mut(id).expect("dense"));
        }
    }

    pub fn is_finite(&self) -> bool {
        let sparse_ok = [&self.user, &self.item, &self.category, &self.position]
            .iter()
            .all(|m| m.values().all(|r| r.iter().all(|v| v.is_finite())));
        sparse_ok
            && TensorId::ALL
                .iter()
                .filter_map(|&id| self.dense(id))
                .all(|g| g.iter().all(|v| v.is_finite()))
    }

    /// Euclidean norm over every entry of every tensor.
    pub fn global_norm(&self) -> f64 {
        let sparse: f64 = [&self.user, &self.item, &self.category, &self.position]
            .into_iter()
            .flat_map(|m| m.values().flatten())
            .map(|v| v * v)
            .sum();
        let dense: f64 = TensorId::ALL
            .iter()
            .filter_map(|&id| self.dense(id))
            .flatten()
            .map(|v| v * v)
            .sum();
        (sparse + dense).sqrt()
    }

    /// Largest absolute gradient entry over every tensor.
    pub fn max_abs(&self) -> f64 {
        let sparse = [&self.user, &self.item, &self.category, &self.position]
            .into_iter()
            .flat_map(|m| m.values().flatten())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        TensorId::ALL
            .iter()
            .filter_map(|&id| self.dense(id))
            .flatten()
            .fold(sparse, |a, v| a.max(v.abs()))
    }
}
