//! Network architecture: sequences, configuration and parameter layout.
//!
//! A network is a stack of residual blocks over manifold-valued sequences
//! followed by a classification head. Every convolution is a weighted
//! Frechet mean over a dilated temporal window, so points never leave the
//! manifold until the head.

mod config;
mod forward;
mod sequence;

pub use config::{parse_key_values, BlockSpec, HeadKind, NetConfig};
pub use forward::{
    dilated_conv_forward, invariant_head_forward, network_forward, network_forward_sequence,
    residual_block_forward, tangent_head_forward, BlockWeights, LayerWeights, WeightsView,
};
pub use sequence::ManifoldSequence;
