use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Argmax positions recorded by [`maxpool2x2`], one flat input index per
/// pooled cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndices {
    output_shape: Shape,
    input_shape: Shape,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn output_shape(&self) -> &Shape {
        &self.output_shape
    }

    pub fn input_shape(&self) -> &Shape {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// 2×2 max-pooling with stride 2. A trailing odd row or column is dropped and
/// ties resolve to the smallest flat index.
pub fn maxpool2x2(input: &Tensor) -> Result<(Tensor, PoolIndices)> {
    input.expect_rank(3, "maxpool input")?;
    let (c, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!(
            "maxpool2x2 needs at least 2x2 spatial extent, got {}",
            input.shape()
        )));
    }
    let (ho, wo) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut argmax = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let top = (ch * h + 2 * i) * w + 2 * j;
                // Row-major scan order keeps the first maximum on ties.
                let mut best = top;
                for idx in [top + 1, top + w, top + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    let output_shape = Shape(vec![c, ho, wo]);
    Ok((
        Tensor::from_parts(output_shape.clone(), out),
        PoolIndices {
            output_shape,
            input_shape: input.shape().clone(),
            argmax,
        },
    ))
}

/// Routes each pooled gradient to the input cell that won the forward max.
pub fn maxpool2x2_backward(
    grad_out: &Tensor,
    indices: &PoolIndices,
    input_shape: &Shape,
) -> Result<Tensor> {
    if grad_out.shape() != &indices.output_shape || input_shape != &indices.input_shape {
        return Err(Error::Consistency(format!(
            "maxpool backward: gradient {} / input {} do not match recorded {} / {}",
            grad_out.shape(),
            input_shape,
            indices.output_shape,
            indices.input_shape
        )));
    }
    let mut grad_in = Tensor::zeros_like_shape(input_shape);
    let dst = grad_in.data_mut();
    for (&idx, &g) in indices.argmax.iter().zip(grad_out.data()) {
        dst[idx] += g;
    }
    Ok(grad_in)
}
