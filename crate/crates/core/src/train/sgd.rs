use super::gradients::Gradients;
use crate::error::{Error, Result};
use crate::model::{ModelParams, TensorId};

/// `θ ← θ − lr·g`. Sparse tables only touch rows present in `grads`; γ and
/// the position table stay fixed when the model variant freezes them.
///
/// Every update is checked before anything is written, so a non-finite step
/// leaves `params` untouched.
pub fn sgd_step(params: &mut ModelParams, grads: &Gradients, lr: f64) -> Result<()> {
    let variant = params.hyper.variant;
    let frozen = |id: TensorId| {
        (id == TensorId::Gamma && !variant.trains_gamma()) || (id == TensorId::Position && !variant.trains_position())
    };

    for id in TensorId::ALL {
        if frozen(id) {
            continue;
        }
        let theta = params.tensor(id);
        let ok = match grads.sparse(id) {
            Some(rows) => {
                let cols = ModelParams::expected_shape(&params.hyper, id).1;
                rows.iter().all(|(&r, g)| {
                    theta[r * cols..(r + 1) * cols]
                        .iter()
                        .zip(g)
                        .all(|(t, g)| (t - lr * g).is_finite())
                })
            }
            None => theta
                .iter()
                .zip(grads.dense(id).expect("dense"))
                .all(|(t, g)| (t - lr * g).is_finite()),
        };
        if !ok {
            return Err(Error::NonFinite(id.name().to_string()));
        }
    }

    for id in TensorId::ALL {
        if frozen(id) {
            continue;
        }
        match grads.sparse(id) {
            Some(rows) => {
                let cols = ModelParams::expected_shape(&params.hyper, id).1;
                let theta = params.tensor_mut(id);
                for (&r, g) in rows {
                    for (t, g) in theta[r * cols..(r + 1) * cols].iter_mut().zip(g) {
                        *t -= lr * g;
                    }
                }
            }
            None => {
                let g = grads.dense(id).expect("dense");
                for (t, g) in params.tensor_mut(id).iter_mut().zip(g) {
                    *t -= lr * g;
                }
            }
        }
    }
    Ok(())
}
