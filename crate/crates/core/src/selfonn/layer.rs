//! The generative-neuron convolution.
//!
//! A layer of order Q holds Q kernel banks. Its output is the sum of Q valid
//! convolutions, the q-th applied to the element-wise q-th power of the input:
//!
//! ```text
//! out = Σ_{q=1..Q} conv(input^q, kernels[q]) + biases[q]
//! ```
//!
//! With Q = 1 this is exactly a plain convolution.

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::tensor::conv::{conv_accumulate, conv_input_grad_accumulate, conv_weight_grad};
use crate::tensor::{elementwise_pow, Shape, Tensor};

/// Kernels `[Q, Cout, Cin, Kh, Kw]` and per-order biases `[Q, Cout]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfOnnLayerParams {
    q_order: u32,
    kernels: Tensor,
    biases: Tensor,
}

/// Everything the backward pass needs from one forward call: the input
/// powers `input^1 .. input^Q`.
#[derive(Clone, Debug)]
pub struct LayerCache {
    powers: Vec<Tensor>,
}

impl LayerCache {
    pub fn powers(&self) -> &[Tensor] {
        &self.powers
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfOnnGrads {
    pub kernels: Tensor,
    pub biases: Tensor,
    pub input: Option<Tensor>,
}

impl SelfOnnLayerParams {
    pub fn new(kernels: Tensor, biases: Tensor) -> Result<Self> {
        kernels.expect_rank(5, "generative kernels")?;
        let q = kernels.dims()[0];
        let cout = kernels.dims()[1];
        if biases.dims() != [q, cout] {
            return Err(Error::Dimension(format!(
                "biases {} do not match kernels {}",
                biases.shape(),
                kernels.shape()
            )));
        }
        Ok(SelfOnnLayerParams {
            q_order: q as u32,
            kernels,
            biases,
        })
    }

    /// Glorot-uniform kernels with the fan-in scaled by Q; zero biases.
    pub fn init<R: Rng + ?Sized>(
        q_order: u32,
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let q = q_order as usize;
        let fan_in = in_channels * kernel * kernel * q;
        let fan_out = out_channels * kernel * kernel;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let kernels = Tensor::from_fn(vec![q, out_channels, in_channels, kernel, kernel], |_| {
            rng.random_range(-limit..limit)
        })?;
        let biases = Tensor::zeros(vec![q, out_channels])?;
        Self::new(kernels, biases)
    }

    pub fn q_order(&self) -> u32 {
        self.q_order
    }

    pub fn kernels(&self) -> &Tensor {
        &self.kernels
    }

    pub fn biases(&self) -> &Tensor {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.kernels, &mut self.biases)
    }

    #[cfg(test)]
    fn kernels_mut(&mut self) -> &mut Tensor {
        &mut self.kernels
    }

    #[cfg(test)]
    fn biases_mut(&mut self) -> &mut Tensor {
        &mut self.biases
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.dims()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.dims()[2]
    }

    /// `(kh, kw)`.
    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.dims()[3], self.kernels.dims()[4])
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.biases.len()
    }

    fn bank_len(&self) -> usize {
        self.kernels.len() / self.q_order as usize
    }

    /// Kernel bank of order `q` (zero based), laid out `[Cout, Cin, Kh, Kw]`.
    fn bank(&self, q: usize) -> &[f64] {
        let n = self.bank_len();
        &self.kernels.data()[q * n..(q + 1) * n]
    }

    fn output_dims(&self, input: &Tensor) -> Result<(usize, usize, usize)> {
        input.expect_rank(3, "generative layer input")?;
        let (kh, kw) = self.kernel_size();
        let d = input.dims();
        if d[0] != self.in_channels() || d[1] < kh || d[2] < kw {
            return Err(Error::Dimension(format!(
                "generative layer: input {} incompatible with kernels {}",
                input.shape(),
                self.kernels.shape()
            )));
        }
        Ok((self.out_channels(), d[1] - kh + 1, d[2] - kw + 1))
    }
}

fn accumulate_orders(layer: &SelfOnnLayerParams, powers: &[Tensor]) -> Result<Tensor> {
    let (cout, ho, wo) = layer.output_dims(&powers[0])?;
    let d = powers[0].dims();
    let (kh, kw) = layer.kernel_size();
    let plane = ho * wo;
    let q_order = layer.q_order as usize;
    let b = layer.biases.data();
    let mut out = vec![0.0; cout * plane];
    for (o, chunk) in out.chunks_exact_mut(plane).enumerate() {
        // Start from the first bias so a single order reproduces a plain
        // convolution bit for bit.
        let mut bias = b[o];
        for q in 1..q_order {
            bias += b[q * cout + o];
        }
        chunk.fill(bias);
    }
    for (q, p) in powers.iter().enumerate() {
        conv_accumulate(p.data(), (d[0], d[1], d[2]), layer.bank(q), (cout, kh, kw), &mut out);
    }
    Ok(Tensor::from_parts(Shape::new(vec![cout, ho, wo])?, out))
}

fn input_powers(layer: &SelfOnnLayerParams, input: &Tensor) -> Result<Vec<Tensor>> {
    let mut powers = Vec::with_capacity(layer.q_order as usize);
    powers.push(input.clone());
    for q in 2..=layer.q_order {
        powers.push(elementwise_pow(input, q)?);
    }
    Ok(powers)
}

/// Forward pass of a generative layer.
pub fn selfonn_forward(layer: &SelfOnnLayerParams, input: &Tensor) -> Result<Tensor> {
    let powers = input_powers(layer, input)?;
    accumulate_orders(layer, &powers)
}

/// Forward pass that keeps the input powers for [`selfonn_backward`].
pub fn selfonn_forward_cached(
    layer: &SelfOnnLayerParams,
    input: &Tensor,
) -> Result<(Tensor, LayerCache)> {
    let powers = input_powers(layer, input)?;
    let out = accumulate_orders(layer, &powers)?;
    Ok((out, LayerCache { powers }))
}

/// Gradients with respect to the kernels, the per-order biases and the
/// layer input.
pub fn selfonn_backward(
    layer: &SelfOnnLayerParams,
    cache: &LayerCache,
    grad_out: &Tensor,
) -> Result<SelfOnnGrads> {
    backward(layer, cache, grad_out, true)
}

pub(crate) fn backward(
    layer: &SelfOnnLayerParams,
    cache: &LayerCache,
    grad_out: &Tensor,
    need_input: bool,
) -> Result<SelfOnnGrads> {
    let q_order = layer.q_order as usize;
    if cache.powers.len() != q_order {
        return Err(Error::Consistency(format!(
            "cache holds {} input powers for an order-{q_order} layer",
            cache.powers.len()
        )));
    }
    let input = &cache.powers[0];
    let (cout, ho, wo) = layer.output_dims(input)?;
    if grad_out.dims() != [cout, ho, wo] {
        return Err(Error::Consistency(format!(
            "output gradient {} does not match the cached forward output [{cout}x{ho}x{wo}]",
            grad_out.shape()
        )));
    }
    let in_dims = input.dims();
    let (cin, h, w) = (in_dims[0], in_dims[1], in_dims[2]);
    let (kh, kw) = layer.kernel_size();
    let bank = layer.bank_len();
    let g = grad_out.data();

    let mut dk = vec![0.0; layer.kernels.len()];
    for (q, p) in cache.powers.iter().enumerate() {
        conv_weight_grad(p.data(), (cin, h, w), g, (cout, ho, wo), &mut dk[q * bank..(q + 1) * bank]);
    }

    let plane = ho * wo;
    let per_channel: Vec<f64> = g.chunks_exact(plane).map(|c| c.iter().sum()).collect();
    let mut db = Vec::with_capacity(q_order * cout);
    for _ in 0..q_order {
        db.extend_from_slice(&per_channel);
    }

    let input_grad = if need_input {
        let mut dx = vec![0.0; input.len()];
        conv_input_grad_accumulate(layer.bank(0), (cout, cin, kh, kw), g, (ho, wo), &mut dx);
        let mut scratch = vec![0.0; input.len()];
        for q in 1..q_order {
            scratch.fill(0.0);
            conv_input_grad_accumulate(layer.bank(q), (cout, cin, kh, kw), g, (ho, wo), &mut scratch);
            // d(y^(q+1))/dy = (q+1) · y^q, and y^q is cached at index q-1.
            let factor = (q + 1) as f64;
            let lower = cache.powers[q - 1].data();
            for ((d, s), y) in dx.iter_mut().zip(&scratch).zip(lower) {
                *d += factor * y * s;
            }
        }
        Some(Tensor::from_parts(input.shape().clone(), dx))
    } else {
        None
    };

    Ok(SelfOnnGrads {
        kernels: Tensor::from_parts(layer.kernels.shape().clone(), dk),
        biases: Tensor::from_parts(layer.biases.shape().clone(), db),
        input: input_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{conv2d_backward_input, conv2d_backward_weights, conv2d_valid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn scalar_layer(w: &[f64], b: &[f64]) -> SelfOnnLayerParams {
        let q = w.len();
        SelfOnnLayerParams::new(
            Tensor::new(vec![q, 1, 1, 1, 1], w.to_vec()).unwrap(),
            Tensor::new(vec![q, 1], b.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn first_order_is_plain_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let x = random(&[3, 9, 8], &mut rng);
            let k = random(&[4, 3, 3, 2], &mut rng);
            let b = random(&[4], &mut rng);
            let layer = SelfOnnLayerParams::new(
                k.clone().reshape(vec![1, 4, 3, 3, 2]).unwrap(),
                b.clone().reshape(vec![1, 4]).unwrap(),
            )
            .unwrap();
            let got = selfonn_forward(&layer, &x).unwrap();
            let want = conv2d_valid(&x, &k, Some(&b)).unwrap();
            assert!(got.data().iter().zip(want.data()).all(|(a, b)| a.to_bits() == b.to_bits()));

            let g = random(want.dims(), &mut rng);
            let (_, cache) = selfonn_forward_cached(&layer, &x).unwrap();
            let grads = selfonn_backward(&layer, &cache, &g).unwrap();
            assert_eq!(grads.kernels.data(), conv2d_backward_weights(&x, &g).unwrap().data());
            assert_eq!(grads.input.unwrap(), conv2d_backward_input(&k, &g).unwrap());
        }
    }

    #[test]
    fn second_order_scalar() {
        let layer = scalar_layer(&[1.0, 2.0], &[0.0, 0.0]);
        let x = Tensor::new(vec![1, 1, 1], vec![0.3]).unwrap();
        let y = selfonn_forward(&layer, &x).unwrap();
        assert!((y.data()[0] - 0.48).abs() < 1e-15);

        let (_, cache) = selfonn_forward_cached(&layer, &x).unwrap();
        let g = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let grads = selfonn_backward(&layer, &cache, &g).unwrap();
        assert!((grads.input.unwrap().data()[0] - 2.2).abs() < 1e-15);
        assert_eq!(grads.kernels.data(), &[0.3, 0.3 * 0.3]);
        assert_eq!(grads.biases.data(), &[1.0, 1.0]);
    }

    #[test]
    fn zero_input_gives_summed_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = SelfOnnLayerParams::new(random(&[3, 2, 1, 2, 2], &mut rng), random(&[3, 2], &mut rng)).unwrap();
        let y = selfonn_forward(&layer, &Tensor::zeros(vec![1, 4, 4]).unwrap()).unwrap();
        let b = layer.biases().data();
        for o in 0..2 {
            let want = b[o] + b[2 + o] + b[4 + o];
            assert!(y.data()[o * 9..(o + 1) * 9].iter().all(|&v| (v - want).abs() < 1e-15));
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layer = SelfOnnLayerParams::init(2, 2, 1, 3, &mut rng).unwrap();
        let other = SelfOnnLayerParams::init(3, 2, 1, 3, &mut rng).unwrap();
        let x = random(&[1, 6, 6], &mut rng);
        let (y, cache) = selfonn_forward_cached(&layer, &x).unwrap();
        assert!(matches!(
            selfonn_backward(&other, &cache, &y),
            Err(Error::Consistency(_))
        ));
        let bad = Tensor::zeros(vec![2, 3, 3]).unwrap();
        assert!(matches!(
            selfonn_backward(&layer, &cache, &bad),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layer = SelfOnnLayerParams::new(random(&[3, 2, 2, 2, 3], &mut rng), random(&[3, 2], &mut rng)).unwrap();
        let x = random(&[2, 5, 6], &mut rng);
        let (y, cache) = selfonn_forward_cached(&layer, &x).unwrap();
        let up = random(y.dims(), &mut rng);
        let grads = selfonn_backward(&layer, &cache, &up).unwrap();
        let h = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);

        let loss = |l: &SelfOnnLayerParams, x: &Tensor| selfonn_forward(l, x).unwrap().dot(&up).unwrap();
        for i in 0..layer.kernels().len() {
            let (mut p, mut m) = (layer.clone(), layer.clone());
            p.kernels_mut().data_mut()[i] += h;
            m.kernels_mut().data_mut()[i] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!(rel(fd, grads.kernels.data()[i]) < 1e-4);
        }
        for i in 0..layer.biases().len() {
            let (mut p, mut m) = (layer.clone(), layer.clone());
            p.biases_mut().data_mut()[i] += h;
            m.biases_mut().data_mut()[i] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!(rel(fd, grads.biases.data()[i]) < 1e-4);
        }
        let dx = grads.input.unwrap();
        for i in 0..x.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (loss(&layer, &p) - loss(&layer, &m)) / (2.0 * h);
            assert!(rel(fd, dx.data()[i]) < 1e-4, "{i}: {fd} vs {}", dx.data()[i]);
        }
    }
}
