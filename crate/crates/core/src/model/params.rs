use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{init_matrix, InitScheme, Mat};

/// Model variants used for component ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    Full,
    /// No short-term layer: `u_t = u_e + u_{t-1}`.
    NoShort,
    /// γ held at its initial value of 1.0.
    NoGamma,
    /// Personalized position weights held at 1.0.
    NoPosition,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Full => 0,
            Variant::NoShort => 1,
            Variant::NoGamma => 2,
            Variant::NoPosition => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Variant> {
        Some(match code {
            0 => Variant::Full,
            1 => Variant::NoShort,
            2 => Variant::NoGamma,
            3 => Variant::NoPosition,
            _ => return None,
        })
    }

    pub fn trains_gamma(self) -> bool {
        self != Variant::NoGamma
    }

    pub fn trains_position(self) -> bool {
        self != Variant::NoPosition
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "tlsan" => Ok(Variant::Full),
            "ns" | "no-short" => Ok(Variant::NoShort),
            "ng" | "no-gamma" => Ok(Variant::NoGamma),
            "np" | "no-position" => Ok(Variant::NoPosition),
            _ => Err(Error::Config(format!("unknown variant {s:?} (full, ns, ng, np)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::NoShort => "ns",
            Variant::NoGamma => "ng",
            Variant::NoPosition => "np",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Size of each lookup table row; the combined embedding is `2 * dim`.
    pub dim: usize,
    /// Long-term sequence length (number of position slots).
    pub max_long: usize,
    pub heads: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub variant: Variant,
}

impl HyperParams {
    /// Combined embedding width `2 * dim`.
    pub fn width(&self) -> usize {
        2 * self.dim
    }

    pub fn head_size(&self) -> usize {
        self.width() / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.max_long == 0 {
            return Err(Error::Config("dim, heads and max_long must be positive".into()));
        }
        if !self.width().is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "embedding width {} not divisible by {} heads",
                self.width(),
                self.heads
            )));
        }
        if self.n_users == 0 || self.n_items == 0 || self.n_categories == 0 {
            return Err(Error::Config("empty catalog".into()));
        }
        Ok(())
    }
}

/// Every trainable tensor, in checkpoint order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TensorId {
    User,
    Item,
    Category,
    Position,
    Gamma,
    W1,
    W2,
    W3,
    W4,
    B1,
    B2,
    B3,
    B4,
}

impl TensorId {
    pub const ALL: [TensorId; 13] = [
        TensorId::User,
        TensorId::Item,
        TensorId::Category,
        TensorId::Position,
        TensorId::Gamma,
        TensorId::W1,
        TensorId::W2,
        TensorId::W3,
        TensorId::W4,
        TensorId::B1,
        TensorId::B2,
        TensorId::B3,
        TensorId::B4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TensorId::User => "U",
            TensorId::Item => "I",
            TensorId::Category => "C",
            TensorId::Position => "P",
            TensorId::Gamma => "gamma",
            TensorId::W1 => "W1",
            TensorId::W2 => "W2",
            TensorId::W3 => "W3",
            TensorId::W4 => "W4",
            TensorId::B1 => "b1",
            TensorId::B2 => "b2",
            TensorId::B3 => "b3",
            TensorId::B4 => "b4",
        }
    }

    pub fn from_name(name: &str) -> Option<TensorId> {
        TensorId::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Part of the L2-regularized set `{U, I, W*, b*}`.
    pub fn regularized(self) -> bool {
        !matches!(self, TensorId::Category | TensorId::Position | TensorId::Gamma)
    }
}

impl fmt::Display for TensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub hyper: HyperParams,
    /// `n_users × dim`
    pub user: Mat,
    /// `n_items × dim`
    pub item: Mat,
    /// `n_categories × dim`; row 0 is the reserved unknown category.
    pub category: Mat,
    /// `n_users × max_long` scalar weight per user and slot (slot
    /// `max_long - 1` is the most recent long-term item).
    pub position: Mat,
    pub gamma: f64,
    /// Long-term attention: `att = W1ᵀ relu(W2 h + b2) + b1`.
    pub w1: Mat,
    pub w2: Mat,
    /// Short-term attention: `att = W3ᵀ relu(W4 s + b4) + b3`.
    pub w3: Mat,
    pub w4: Mat,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub b3: Vec<f64>,
    pub b4: Vec<f64>,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(hyper: HyperParams, rng: &mut R) -> Result<ModelParams> {
        hyper.validate()?;
        let d = hyper.dim;
        let w = hyper.width();
        let emb = InitScheme::Embedding { dim: d };
        Ok(ModelParams {
            hyper,
            user: init_matrix(rng, hyper.n_users, d, emb),
            item: init_matrix(rng, hyper.n_items, d, emb),
            category: init_matrix(rng, hyper.n_categories, d, emb),
            position: init_matrix(rng, hyper.n_users, hyper.max_long, InitScheme::Constant(1.0)),
            gamma: 1.0,
            w1: init_matrix(rng, w, w, InitScheme::Glorot),
            w2: init_matrix(rng, w, w, InitScheme::Glorot),
            w3: init_matrix(rng, w, w, InitScheme::Glorot),
            w4: init_matrix(rng, w, w, InitScheme::Glorot),
            b1: vec![0.0; w],
            b2: vec![0.0; w],
            b3: vec![0.0; w],
            b4: vec![0.0; w],
        })
    }

    /// All-zero parameters of the right shapes (P and γ at 1.0).
    pub fn zeros(hyper: HyperParams) -> Result<ModelParams> {
        hyper.validate()?;
        let d = hyper.dim;
        let w = hyper.width();
        Ok(ModelParams {
            hyper,
            user: Mat::zeros(hyper.n_users, d),
            item: Mat::zeros(hyper.n_items, d),
            category: Mat::zeros(hyper.n_categories, d),
            position: Mat::filled(hyper.n_users, hyper.max_long, 1.0),
            gamma: 1.0,
            w1: Mat::zeros(w, w),
            w2: Mat::zeros(w, w),
            w3: Mat::zeros(w, w),
            w4: Mat::zeros(w, w),
            b1: vec![0.0; w],
            b2: vec![0.0; w],
            b3: vec![0.0; w],
            b4: vec![0.0; w],
        })
    }

    /// Expected `(rows, cols)` of each tensor under the hyperparameters.
    pub fn expected_shape(hyper: &HyperParams, id: TensorId) -> (usize, usize) {
        let w = hyper.width();
        match id {
            TensorId::User => (hyper.n_users, hyper.dim),
            TensorId::Item => (hyper.n_items, hyper.dim),
            TensorId::Category => (hyper.n_categories, hyper.dim),
            TensorId::Position => (hyper.n_users, hyper.max_long),
            TensorId::Gamma => (1, 1),
            TensorId::W1 | TensorId::W2 | TensorId::W3 | TensorId::W4 => (w, w),
            TensorId::B1 | TensorId::B2 | TensorId::B3 | TensorId::B4 => (1, w),
        }
    }

    pub fn tensor(&self, id: TensorId) -> &[f64] {
        match id {
            TensorId::User => self.user.data(),
            TensorId::Item => self.item.data(),
            TensorId::Category => self.category.data(),
            TensorId::Position => self.position.data(),
            TensorId::Gamma => std::slice::from_ref(&self.gamma),
            TensorId::W1 => self.w1.data(),
            TensorId::W2 => self.w2.data(),
            TensorId::W3 => self.w3.data(),
            TensorId::W4 => self.w4.data(),
            TensorId::B1 => &self.b1,
            TensorId::B2 => &self.b2,
            TensorId::B3 => &self.b3,
            TensorId::B4 => &self.b4,
        }
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> &mut [f64] {
        match id {
            TensorId::User => self.user.data_mut(),
            TensorId::Item => self.item.data_mut(),
            TensorId::Category => self.category.data_mut(),
            TensorId::Position => self.position.data_mut(),
            TensorId::Gamma => std::slice::from_mut(&mut self.gamma),
            TensorId::W1 => self.w1.data_mut(),
            TensorId::W2 => self.w2.data_mut(),
            TensorId::W3 => self.w3.data_mut(),
            TensorId::W4 => self.w4.data_mut(),
            TensorId::B1 => &mut self.b1,
            TensorId::B2 => &mut self.b2,
            TensorId::B3 => &mut self.b3,
            TensorId::B4 => &mut self.b4,
        }
    }

    pub fn is_finite(&self) -> bool {
        TensorId::ALL.iter().all(|&t| self.tensor(t).iter().all(|v| v.is_finite()))
    }
}
