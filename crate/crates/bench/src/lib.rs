//! Fixed, seeded inputs shared by the benchmarks.

use rand::RngExt;
use selfonn_core::seed::{self, Stream};
use selfonn_core::tensor::Tensor;

/// Uniform `[0, 1)` tensor; the same `tag` always gives the same values.
pub fn fixture(dims: &[usize], tag: u32) -> Tensor {
    let mut rng = seed::rng(0, Stream::Bench, tag);
    Tensor::from_fn(dims.to_vec(), |_| rng.random_range(0.0..1.0)).expect("non-empty fixture shape")
}

/// Uniform `[-0.5, 0.5)` tensor for weights.
pub fn weights(dims: &[usize], tag: u32) -> Tensor {
    let mut rng = seed::rng(1, Stream::Bench, tag);
    Tensor::from_fn(dims.to_vec(), |_| rng.random_range(-0.5..0.5)).expect("non-empty fixture shape")
}
