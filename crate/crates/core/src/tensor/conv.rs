//! Valid (unpadded, stride 1) 2D cross-correlation and its two adjoints.
//!
//! All three kernels accumulate into each output element in a fixed order
//! (channel, kernel row, kernel column), so results are reproducible bit for
//! bit regardless of how the loops are blocked.

use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Adds `Σ_c Σ_r Σ_t k[o,c,r,t] · x[c,m+r,n+t]` into `out[o,m,n]`.
///
/// `x` is `[cin, h, w]`, `k` is `[cout, cin, kh, kw]`, `out` is
/// `[cout, h-kh+1, w-kw+1]`. The caller checks the extents.
pub(crate) fn conv_accumulate(
    x: &[f64],
    (cin, h, w): (usize, usize, usize),
    k: &[f64],
    (cout, kh, kw): (usize, usize, usize),
    out: &mut [f64],
) {
    let (ho, wo) = (h - kh + 1, w - kw + 1);
    let plane = ho * wo;
    for o in 0..cout {
        let out_o = &mut out[o * plane..(o + 1) * plane];
        for c in 0..cin {
            let x_c = &x[c * h * w..(c + 1) * h * w];
            for r in 0..kh {
                for t in 0..kw {
                    let wv = k[((o * cin + c) * kh + r) * kw + t];
                    for m in 0..ho {
                        let src = &x_c[(m + r) * w + t..(m + r) * w + t + wo];
                        let dst = &mut out_o[m * wo..(m + 1) * wo];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// Writes `Σ_m Σ_n g[o,m,n] · x[c,m+r,n+t]` into `dw[o,c,r,t]`.
pub(crate) fn conv_weight_grad(
    x: &[f64],
    (cin, h, w): (usize, usize, usize),
    g: &[f64],
    (cout, ho, wo): (usize, usize, usize),
    dw: &mut [f64],
) {
    let (kh, kw) = (h - ho + 1, w - wo + 1);
    for o in 0..cout {
        let g_o = &g[o * ho * wo..(o + 1) * ho * wo];
        for c in 0..cin {
            let x_c = &x[c * h * w..(c + 1) * h * w];
            for r in 0..kh {
                for t in 0..kw {
                    let mut acc = 0.0;
                    for m in 0..ho {
                        let xs = &x_c[(m + r) * w + t..(m + r) * w + t + wo];
                        let gs = &g_o[m * wo..(m + 1) * wo];
                        for (a, b) in gs.iter().zip(xs) {
                            acc += a * b;
                        }
                    }
                    dw[((o * cin + c) * kh + r) * kw + t] = acc;
                }
            }
        }
    }
}

/// Adds the input adjoint `Σ_o Σ_r Σ_t k[o,c,r,t] · g[o,i−r,j−t]` into `dx`.
pub(crate) fn conv_input_grad_accumulate(
    k: &[f64],
    (cout, cin, kh, kw): (usize, usize, usize, usize),
    g: &[f64],
    (ho, wo): (usize, usize),
    dx: &mut [f64],
) {
    let (h, w) = (ho + kh - 1, wo + kw - 1);
    for o in 0..cout {
        let g_o = &g[o * ho * wo..(o + 1) * ho * wo];
        for c in 0..cin {
            let dx_c = &mut dx[c * h * w..(c + 1) * h * w];
            for r in 0..kh {
                for t in 0..kw {
                    let wv = k[((o * cin + c) * kh + r) * kw + t];
                    for m in 0..ho {
                        let dst = &mut dx_c[(m + r) * w + t..(m + r) * w + t + wo];
                        let src = &g_o[m * wo..(m + 1) * wo];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// `out[o,m,n] = bias[o] + Σ_c Σ_r Σ_t kernels[o,c,r,t] · input[c,m+r,n+t]`.
pub fn conv2d_valid(input: &Tensor, kernels: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    input.expect_rank(3, "conv input")?;
    kernels.expect_rank(4, "conv kernels")?;
    let (cin, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (cout, kcin, kh, kw) = (
        kernels.dims()[0],
        kernels.dims()[1],
        kernels.dims()[2],
        kernels.dims()[3],
    );
    if kcin != cin || h < kh || w < kw {
        return Err(Error::Dimension(format!(
            "conv2d_valid: input {} incompatible with kernels {}",
            input.shape(),
            kernels.shape()
        )));
    }
    if let Some(b) = bias {
        if b.dims() != [cout] {
            return Err(Error::Dimension(format!(
                "conv2d_valid: bias {} does not match {cout} output channels",
                b.shape()
            )));
        }
    }
    let (ho, wo) = (h - kh + 1, w - kw + 1);
    let plane = ho * wo;
    let mut out = vec![0.0; cout * plane];
    if let Some(b) = bias {
        for (o, chunk) in out.chunks_exact_mut(plane).enumerate() {
            chunk.fill(b.data()[o]);
        }
    }
    conv_accumulate(input.data(), (cin, h, w), kernels.data(), (cout, kh, kw), &mut out);
    Ok(Tensor::from_parts(Shape(vec![cout, ho, wo]), out))
}

/// `dL/dw[o,c,r,t] = Σ_m Σ_n grad_out[o,m,n] · input[c,m+r,n+t]`.
///
/// The kernel extent is implied by the difference of the spatial sizes.
pub fn conv2d_backward_weights(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.expect_rank(3, "conv input")?;
    grad_out.expect_rank(3, "conv output gradient")?;
    let (cin, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (cout, ho, wo) = (grad_out.dims()[0], grad_out.dims()[1], grad_out.dims()[2]);
    if ho > h || wo > w {
        return Err(Error::Dimension(format!(
            "conv2d_backward_weights: output gradient {} larger than input {}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let (kh, kw) = (h - ho + 1, w - wo + 1);
    let mut dw = vec![0.0; cout * cin * kh * kw];
    conv_weight_grad(input.data(), (cin, h, w), grad_out.data(), (cout, ho, wo), &mut dw);
    Ok(Tensor::from_parts(Shape(vec![cout, cin, kh, kw]), dw))
}

/// `dL/dy[c,i,j] = Σ_o Σ_r Σ_t kernels[o,c,r,t] · grad_out[o,i−r,j−t]` over
/// in-range indices: a full correlation with the kernel roles transposed.
pub fn conv2d_backward_input(kernels: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    kernels.expect_rank(4, "conv kernels")?;
    grad_out.expect_rank(3, "conv output gradient")?;
    let kd = kernels.dims();
    let (cout, cin, kh, kw) = (kd[0], kd[1], kd[2], kd[3]);
    let (gcout, ho, wo) = (grad_out.dims()[0], grad_out.dims()[1], grad_out.dims()[2]);
    if gcout != cout {
        return Err(Error::Dimension(format!(
            "conv2d_backward_input: kernels {} vs output gradient {}",
            kernels.shape(),
            grad_out.shape()
        )));
    }
    let (h, w) = (ho + kh - 1, wo + kw - 1);
    let mut dx = vec![0.0; cin * h * w];
    conv_input_grad_accumulate(kernels.data(), (cout, cin, kh, kw), grad_out.data(), (ho, wo), &mut dx);
    Ok(Tensor::from_parts(Shape(vec![cin, h, w]), dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(dims: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(dims.to_vec(), data.to_vec()).unwrap()
    }

    fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    /// Seven-loop reference written straight from the definition.
    fn conv_oracle(x: &Tensor, k: &Tensor) -> Vec<f64> {
        let [cin, h, w] = [x.dims()[0], x.dims()[1], x.dims()[2]];
        let [cout, _, kh, kw] = [k.dims()[0], k.dims()[1], k.dims()[2], k.dims()[3]];
        let (ho, wo) = (h - kh + 1, w - kw + 1);
        let mut out = vec![0.0; cout * ho * wo];
        for o in 0..cout {
            for m in 0..ho {
                for n in 0..wo {
                    let mut acc = 0.0;
                    for c in 0..cin {
                        for r in 0..kh {
                            for s in 0..kw {
                                acc += k.data()[((o * cin + c) * kh + r) * kw + s]
                                    * x.data()[(c * h + m + r) * w + n + s];
                            }
                        }
                    }
                    out[(o * ho + m) * wo + n] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let k = t(&[1, 1, 1, 1], &[1.0]);
        let y = conv2d_valid(&x, &k, None).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn counting_window() {
        let x = Tensor::from_fn(vec![1, 3, 3], |_| 1.0).unwrap();
        let k = Tensor::from_fn(vec![1, 1, 2, 2], |_| 1.0).unwrap();
        let y = conv2d_valid(&x, &k, None).unwrap();
        assert_eq!(y.dims(), &[1, 2, 2]);
        assert_eq!(y.data(), &[4.0; 4]);
    }

    #[test]
    fn diagonal_difference_kernel() {
        let x = Tensor::from_fn(vec![1, 3, 3], |i| (i + 1) as f64).unwrap();
        let k = t(&[1, 1, 2, 2], &[1.0, 0.0, 0.0, -1.0]);
        let y = conv2d_valid(&x, &k, None).unwrap();
        assert_eq!(y.data(), conv_oracle(&x, &k).as_slice());
        assert_eq!(y.data(), &[-4.0; 4]);
    }

    #[test]
    fn matches_oracle_with_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[3, 7, 6], &mut rng);
        let k = random(&[4, 3, 3, 2], &mut rng);
        let b = random(&[4], &mut rng);
        let y = conv2d_valid(&x, &k, Some(&b)).unwrap();
        let reference = conv_oracle(&x, &k);
        let plane = 5 * 5;
        for (i, (got, want)) in y.data().iter().zip(&reference).enumerate() {
            assert!((got - (want + b.data()[i / plane])).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let x = Tensor::zeros(vec![2, 3, 3]).unwrap();
        let k = Tensor::zeros(vec![1, 1, 2, 2]).unwrap();
        let msg = conv2d_valid(&x, &k, None).unwrap_err().to_string();
        assert!(msg.contains("[2x3x3]") && msg.contains("[1x1x2x2]"), "{msg}");
        let big = Tensor::zeros(vec![2, 4, 4]).unwrap();
        assert!(conv2d_valid(&Tensor::zeros(vec![2, 3, 3]).unwrap(), &Tensor::zeros(vec![1, 2, 4, 4]).unwrap(), None).is_err());
        assert!(conv2d_backward_weights(&x, &big).is_err());
        assert!(conv2d_backward_input(&k, &Tensor::zeros(vec![2, 2, 2]).unwrap()).is_err());
    }

    #[test]
    fn zero_adjoints() {
        let x = Tensor::from_fn(vec![1, 4, 4], |i| i as f64).unwrap();
        let g = Tensor::zeros(vec![2, 3, 3]).unwrap();
        assert!(conv2d_backward_weights(&x, &g).unwrap().data().iter().all(|&v| v == 0.0));
        let k = Tensor::zeros(vec![2, 1, 2, 2]).unwrap();
        let g = Tensor::from_fn(vec![2, 3, 3], |i| i as f64).unwrap();
        assert!(conv2d_backward_input(&k, &g).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_gradient_of_output_sum() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let g = Tensor::from_fn(vec![1, 2, 2], |_| 1.0).unwrap();
        let dw = conv2d_backward_weights(&x, &g).unwrap();
        assert_eq!(dw.dims(), &[1, 1, 1, 1]);
        assert_eq!(dw.data(), &[10.0]);
    }

    #[test]
    fn identity_kernel_passes_gradient_through() {
        let k = t(&[1, 1, 1, 1], &[1.0]);
        let g = t(&[1, 2, 2], &[0.5, -1.0, 2.0, 3.0]);
        assert_eq!(conv2d_backward_input(&k, &g).unwrap(), g);
    }

    fn central_difference(f: impl Fn(&Tensor) -> f64, at: &Tensor, i: usize) -> f64 {
        let h = 1e-5;
        let mut plus = at.clone();
        plus.data_mut()[i] += h;
        let mut minus = at.clone();
        minus.data_mut()[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[1, 4, 4], &mut rng);
        let k = random(&[1, 1, 2, 2], &mut rng);
        let g = random(&[1, 3, 3], &mut rng);
        let loss_k = |k: &Tensor| conv2d_valid(&x, k, None).unwrap().dot(&g).unwrap();
        let loss_x = |x: &Tensor| conv2d_valid(x, &k, None).unwrap().dot(&g).unwrap();
        let dw = conv2d_backward_weights(&x, &g).unwrap();
        let dx = conv2d_backward_input(&k, &g).unwrap();
        for i in 0..k.len() {
            let fd = central_difference(loss_k, &k, i);
            assert!((fd - dw.data()[i]).abs() <= 1e-6 * fd.abs().max(dw.data()[i].abs()));
        }
        for i in 0..x.len() {
            let fd = central_difference(loss_x, &x, i);
            let a = dx.data()[i];
            assert!((fd - a).abs() <= 1e-6 * fd.abs().max(a.abs()).max(1e-8), "{i}: {fd} vs {a}");
        }
    }
}
