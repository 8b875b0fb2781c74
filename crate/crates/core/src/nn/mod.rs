//! The complex-valued separator network and its architecture arithmetic.

mod config;
pub mod graph;
mod layers;
pub mod ops;
mod tensor;
pub mod weights;

pub use config::{ArchCounts, ModelConfig};
pub use graph::{forward, separator, Graph, NodeId, Outputs};
pub use layers::{
    apply_mask, complex_norm, ctanh, decoder_forward, encoder_forward, receptive_field, separate_offline, separator_forward, trelu,
    ComplexConvLayer,
};
pub use ops::{NormMode, NormState, TRelu};
pub use tensor::ComplexTensor;
pub use weights::{ModelWeights, ParamLayout};

/// Exact parameter count and MAC/s of a configuration.
pub fn count_params_and_macs(config: &ModelConfig) -> ArchCounts {
    config.count_params_and_macs()
}
