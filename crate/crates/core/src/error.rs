use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {what} {index} >= {len}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("no records")]
    NoRecords,

    #[error("empty dataset after filtering")]
    EmptyAfterFilter,

    #[error("all positions masked")]
    AllMasked,

    #[error("degenerate context: empty short-term session and zero long-term preference")]
    DegenerateContext,

    #[error("negative day delta {0}")]
    NegativeDelta(i64),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u16, found: u16 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}; last good checkpoint kept")]
    Diverged { step: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
