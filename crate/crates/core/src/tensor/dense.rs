use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Gradients of a fully connected layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    weights.expect_rank(2, "dense weights")?;
    let (units, width) = (weights.dims()[0], weights.dims()[1]);
    if x.len() != width || bias.dims() != [units] {
        return Err(Error::Dimension(format!(
            "dense: input {} / bias {} incompatible with weights {}",
            x.shape(),
            bias.shape(),
            weights.shape()
        )));
    }
    Ok((units, width))
}

/// `out[u] = bias[u] + Σ_d weights[u,d] · x[d]`. The input is read flat, so
/// a pooled feature map can be passed without reshaping.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (units, width) = check(x, weights, bias)?;
    let w = weights.data();
    let out = (0..units)
        .map(|u| {
            let mut acc = bias.data()[u];
            for (a, b) in w[u * width..(u + 1) * width].iter().zip(x.data()) {
                acc += a * b;
            }
            acc
        })
        .collect();
    Ok(Tensor::from_parts(Shape(vec![units]), out))
}

/// Affine adjoint. The input gradient takes the shape of `x`.
pub fn dense_backward(
    x: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<DenseGrads> {
    let (units, width) = check(x, weights, bias)?;
    if grad_out.dims() != [units] {
        return Err(Error::Dimension(format!(
            "dense_backward: output gradient {} for {units} units",
            grad_out.shape()
        )));
    }
    let w = weights.data();
    let g = grad_out.data();
    let mut dx = vec![0.0; width];
    let mut dw = vec![0.0; units * width];
    for u in 0..units {
        let gu = g[u];
        let row = &w[u * width..(u + 1) * width];
        for (d, wv) in dx.iter_mut().zip(row) {
            *d += wv * gu;
        }
        for (d, xv) in dw[u * width..(u + 1) * width].iter_mut().zip(x.data()) {
            *d = gu * xv;
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_parts(x.shape().clone(), dx),
        weights: Tensor::from_parts(weights.shape().clone(), dw),
        bias: grad_out.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero_weights() {
        let x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let eye = Tensor::from_fn(vec![3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 }).unwrap();
        let zb = Tensor::zeros(vec![3]).unwrap();
        assert_eq!(dense_forward(&x, &eye, &zb).unwrap(), x);
        let b = Tensor::new(vec![2], vec![0.25, -1.0]).unwrap();
        let zw = Tensor::zeros(vec![2, 3]).unwrap();
        assert_eq!(dense_forward(&x, &zw, &b).unwrap(), b);
        assert!(dense_forward(&x, &Tensor::zeros(vec![2, 4]).unwrap(), &b).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut r = |dims: Vec<usize>| Tensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).unwrap();
        let x = r(vec![5]);
        let w = r(vec![3, 5]);
        let b = r(vec![3]);
        let up = r(vec![3]);
        let grads = dense_backward(&x, &w, &b, &up).unwrap();
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| dense_forward(x, w, b).unwrap().dot(&up).unwrap();
        let h = 1e-5;
        let fd = |f: &dyn Fn(&Tensor) -> f64, t: &Tensor, i: usize| {
            let mut p = t.clone();
            p.data_mut()[i] += h;
            let mut m = t.clone();
            m.data_mut()[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        };
        for i in 0..x.len() {
            let n = fd(&|t| loss(t, &w, &b), &x, i);
            assert!((n - grads.input.data()[i]).abs() < 1e-9);
        }
        for i in 0..w.len() {
            let n = fd(&|t| loss(&x, t, &b), &w, i);
            assert!((n - grads.weights.data()[i]).abs() < 1e-9);
        }
        for i in 0..b.len() {
            let n = fd(&|t| loss(&x, &w, t), &b, i);
            assert!((n - grads.bias.data()[i]).abs() < 1e-9);
        }
    }
}
