//! TLSAN: a time-aware long- and short-term attention network for
//! next-item recommendation, with preprocessing, manual backpropagation,
//! evaluation and a synthetic data generator.

pub mod cli;
pub mod codec;
pub mod config;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
