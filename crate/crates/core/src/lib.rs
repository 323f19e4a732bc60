//! Self-organized operational neural networks for thermal-image fault
//! diagnosis: tensors and convolution kernels, generative-neuron layers and
//! the three-block classifier, Adam training with plateau and early-stop
//! callbacks, 16-bit image handling, fold planning, and metrics.

pub mod data;
pub mod error;
pub mod metrics;
pub mod seed;
pub mod selfonn;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
