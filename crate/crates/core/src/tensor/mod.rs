//! Dense row-major `f64` tensors and the handful of kernels the network needs.
//!
//! Every kernel is a pure function of its arguments. Gradients are derived by
//! hand for each op; there is no autodiff graph.

mod activation;
pub(crate) mod conv;
mod dense;
mod pool;

pub use activation::{
    cross_entropy_with_softmax, elementwise_pow, softmax, tanh_backward, tanh_forward,
};
pub use conv::{conv2d_backward_input, conv2d_backward_weights, conv2d_valid};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use pool::{maxpool2x2, maxpool2x2_backward, PoolIndices};

use std::fmt;

use crate::error::{Error, Result};

/// Tensor dimensions. Every extent is at least one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::Dimension("shape must have at least one axis".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Dimension(format!("shape {dims:?} overflows usize")))?;
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from external data, rejecting length mismatches and
    /// non-finite values.
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if data.len() != shape.numel() {
            return Err(Error::Dimension(format!(
                "shape {shape} needs {} values, got {}",
                shape.numel(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value {} at flat index {i}",
                data[i]
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![0.0; shape.numel()];
        Ok(Tensor { shape, data })
    }

    pub fn from_fn(dims: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = (0..shape.numel()).map(&mut f).collect();
        Ok(Tensor { shape, data })
    }

    /// Internal constructor for kernel outputs; the caller guarantees the length.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Tensor { shape, data }
    }

    pub(crate) fn zeros_like_shape(shape: &Shape) -> Self {
        Tensor {
            shape: shape.clone(),
            data: vec![0.0; shape.numel()],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape,
            data: self.data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.expect_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Index of the largest element; ties go to the first.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn expect_same_shape(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "{op}: shapes {} and {} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.shape.rank() != rank {
            return Err(Error::Dimension(format!(
                "{what} must have rank {rank}, got shape {}",
                self.shape
            )));
        }
        Ok(())
    }
}
