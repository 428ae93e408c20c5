//! The recommendation model: parameters, attention, forward pass and
//! checkpoints.

pub mod attention;
pub mod checkpoint;
pub mod forward;
pub mod params;

pub use attention::{feature_wise_attention, AttentionCache, AttentionParams};
pub use forward::{
    encode, forward, item_embedding, long_term_layer, score, short_term_layer, time_aware_history, time_decay,
    user_embedding, ForwardCache, HistorySlot, TimeAwareHistory,
};
pub use params::{HyperParams, ModelParams, TensorId, Variant};
