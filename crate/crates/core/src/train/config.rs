use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_KS;
use crate::model::Variant;

/// How per-observation losses combine into a batch objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reduction {
    /// Data loss averaged over the batch's observations.
    Mean,
    /// Data loss summed over the batch.
    #[default]
    Sum,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Reduction> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "sum" => Ok(Reduction::Sum),
            _ => Err(Error::Config(format!("unknown reduction {s:?} (mean, sum)"))),
        }
    }
}

impl std::fmt::Display for Reduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Reduction::Mean => "mean",
            Reduction::Sum => "sum",
        })
    }
}

/// Training hyperparameters. Defaults: 32-wide lookup tables, 8 heads, 10
/// long-term slots, batches of 32, λ = 5e-5 and a learning rate of 1.0
/// dropping to 0.1 after 80% of the planned steps.
/// The summed loss is unstable at lr 1.0 without the global-norm clip of 5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub heads: usize,
    pub max_long: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub lr_initial: f64,
    pub lr_drop_fraction: f64,
    pub lr_after: f64,
    pub negatives: usize,
    pub reduction: Reduction,
    /// Rescale the whole step gradient to this global norm when it is larger.
    pub clip_norm: Option<f64>,
    pub variant: Variant,
    /// Evaluate on the test split every this many epochs (0 = only at the end).
    pub eval_every: usize,
    pub eval_ks: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 32,
            heads: 8,
            max_long: 10,
            batch_size: 32,
            lambda: 5e-5,
            epochs: 50,
            seed: 1,
            lr_initial: 1.0,
            lr_drop_fraction: 0.8,
            lr_after: 0.1,
            negatives: 1,
            reduction: Reduction::Sum,
            clip_norm: Some(5.0),
            variant: Variant::Full,
            eval_every: 0,
            eval_ks: DEFAULT_KS.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr_drop_fraction > 0.0 && self.lr_drop_fraction < 1.0) {
            return bad(format!("lr_drop_fraction {} not in (0, 1)", self.lr_drop_fraction));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if self.dim == 0 || self.heads == 0 || !(2 * self.dim).is_multiple_of(self.heads) {
            return bad(format!("2*dim = {} not divisible by {} heads", 2 * self.dim, self.heads));
        }
        if self.max_long == 0 || self.batch_size == 0 || self.negatives == 0 {
            return bad("max_long, batch_size and negatives must be positive".into());
        }
        for lr in [self.lr_initial, self.lr_after] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("learning rate {lr} must be finite and >= 0"));
            }
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("clip_norm {c} must be finite and > 0"));
            }
        }
        if self.eval_ks.contains(&0) {
            return bad("eval K values must be positive".into());
        }
        Ok(())
    }

    /// Largest K in `eval_ks`, reported in the metrics stream.
    pub fn report_k(&self) -> usize {
        self.eval_ks.iter().copied().max().unwrap_or(20)
    }

    /// Learning rate for zero-based `step` out of `total` planned steps.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        if (step as f64) < self.lr_drop_fraction * total as f64 {
            self.lr_initial
        } else {
            self.lr_after
        }
    }

    /// `epochs × ⌈users / batch⌉`
    pub fn planned_steps(&self, users: usize) -> usize {
        self.epochs * users.div_ceil(self.batch_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0, 1000), 1.0);
        assert_eq!(c.lr_at(799, 1000), 1.0);
        assert_eq!(c.lr_at(800, 1000), 0.1);
        assert_eq!(c.lr_at(801, 1000), 0.1);
    }

    #[test]
    fn planned_steps_round_up() {
        let c = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        assert_eq!(c.planned_steps(50), 6);
        assert_eq!(c.planned_steps(64), 6);
        assert_eq!(c.planned_steps(65), 9);
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { lr_drop_fraction: 1.0, ..Default::default() },
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { heads: 5, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
