//! Generative-neuron layers and the block-stacked classifier built from them.

mod config;
mod io;
mod layer;
mod model;

pub use config::{param_count, BlockGeometry, ModelConfig, MAX_Q_ORDER};
pub use io::{decode_weights, encode_weights, load_weights, save_weights, FORMAT_VERSION, MAGIC};
pub use layer::{
    selfonn_backward, selfonn_forward, selfonn_forward_cached, LayerCache, SelfOnnGrads,
    SelfOnnLayerParams,
};
pub use model::{build_model, DenseParams, ForwardCache, Model, ParamLayout};
