//! Checkpoint file.
//!
//! ```text
//! "TLSC" | version u16
//! dim u32 | max_long u32 | heads u32 | n_users u32 | n_items u32 | n_categories u32 | variant u8
//! n_tensors u32
//! per tensor: name_len u16, name (UTF-8), ndims u8, dims u32 * ndims, f64 * prod(dims)
//! ```
//!
//! All integers and floats little-endian, tensors row-major.

use std::path::Path;

use super::params::{HyperParams, ModelParams, TensorId, Variant};
use crate::codec::{write_atomic, Decoder, Encoder};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"TLSC";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let h = &params.hyper;
    let mut e = Encoder::new();
    e.bytes(&CHECKPOINT_MAGIC);
    e.u16(CHECKPOINT_VERSION);
    for v in [h.dim, h.max_long, h.heads, h.n_users, h.n_items, h.n_categories] {
        e.index(v);
    }
    e.u8(h.variant.code());
    e.index(TensorId::ALL.len());
    for id in TensorId::ALL {
        let name = id.name().as_bytes();
        e.u16(name.len() as u16);
        e.bytes(name);
        let dims: Vec<usize> = match id {
            TensorId::Gamma => vec![1],
            TensorId::B1 | TensorId::B2 | TensorId::B3 | TensorId::B4 => vec![h.width()],
            _ => {
                let (r, c) = ModelParams::expected_shape(h, id);
                vec![r, c]
            }
        };
        e.u8(dims.len() as u8);
        for d in dims {
            e.index(d);
        }
        for &v in params.tensor(id) {
            e.f64(v);
        }
    }
    e.finish()
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let mut d = Decoder::new(bytes);
    d.magic(CHECKPOINT_MAGIC)?;
    let version = d.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let mut dims = [0usize; 6];
    for v in dims.iter_mut() {
        *v = d.index("hyperparameter")?;
    }
    let variant_code = d.u8("variant")?;
    let variant =
        Variant::from_code(variant_code).ok_or_else(|| Error::Corrupt(format!("unknown variant code {variant_code}")))?;
    let hyper = HyperParams {
        dim: dims[0],
        max_long: dims[1],
        heads: dims[2],
        n_users: dims[3],
        n_items: dims[4],
        n_categories: dims[5],
        variant,
    };
    hyper.validate()?;
    let mut params = ModelParams::zeros(hyper)?;

    let n = d.index("tensor count")?;
    let mut seen = Vec::new();
    for _ in 0..n {
        let name_len = d.u16("name length")? as usize;
        let name = std::str::from_utf8(d.take(name_len, "tensor name")?)
            .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?;
        let id = TensorId::from_name(name).ok_or_else(|| Error::Corrupt(format!("unknown tensor {name:?}")))?;
        if seen.contains(&id) {
            return Err(Error::Corrupt(format!("duplicate tensor {name}")));
        }
        seen.push(id);
        let ndims = d.u8("ndims")? as usize;
        let shape = (0..ndims).map(|_| d.index("dim")).collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let (r, c) = ModelParams::expected_shape(&hyper, id);
        if count != r * c {
            return Err(Error::Shape(format!(
                "tensor {name} has shape {shape:?}, hyperparameters require {r}x{c}"
            )));
        }
        let dst = params.tensor_mut(id);
        for v in dst.iter_mut() {
            *v = d.f64(name)?;
        }
    }
    d.finish()?;
    if seen.len() != TensorId::ALL.len() {
        return Err(Error::Corrupt(format!("{} of {} tensors present", seen.len(), TensorId::ALL.len())));
    }
    Ok(params)
}

/// Write via temp file and rename.
pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(params))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ModelParams {
        let hyper = HyperParams {
            dim: 4,
            max_long: 3,
            heads: 2,
            n_users: 5,
            n_items: 9,
            n_categories: 4,
            variant: Variant::NoGamma,
        };
        let mut p = ModelParams::init(hyper, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        p.gamma = 1.25;
        p
    }

    #[test]
    fn round_trip() {
        let p = params();
        let bytes = to_bytes(&p);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tlsc");
        let p = params();
        save(&p, &path).unwrap();
        assert_eq!(load(&path).unwrap(), p);
        assert!(!dir.path().join("model.tlsc.tmp").exists());
    }

    #[test]
    fn rejects_bad_input() {
        let mut bytes = to_bytes(&params());
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        bytes[1] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn shape_validated_against_hyperparameters() {
        let mut bytes = to_bytes(&params());
        // n_items lives at offset 4 + 2 + 4 * 4
        bytes[22] = 10;
        assert!(matches!(from_bytes(&bytes), Err(Error::Shape(_))));
    }
}
