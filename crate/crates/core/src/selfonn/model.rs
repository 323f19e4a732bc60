use std::ops::Range;

use rand::{Rng, RngExt};

use super::config::{BlockGeometry, ModelConfig};
use super::layer::{self, selfonn_forward, selfonn_forward_cached, LayerCache, SelfOnnLayerParams};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};
use crate::tensor::{
    dense_backward, dense_forward, maxpool2x2, maxpool2x2_backward, tanh_backward, tanh_forward,
    PoolIndices, Tensor,
};

/// Weights `[units, width]` and bias `[units]` of a fully connected layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    weights: Tensor,
    bias: Tensor,
}

impl DenseParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        weights.expect_rank(2, "dense weights")?;
        if bias.dims() != [weights.dims()[0]] {
            return Err(Error::Dimension(format!(
                "dense bias {} does not match weights {}",
                bias.shape(),
                weights.shape()
            )));
        }
        Ok(DenseParams { weights, bias })
    }

    fn init<R: Rng + ?Sized>(units: usize, width: usize, rng: &mut R) -> Result<Self> {
        let limit = (6.0 / (units + width) as f64).sqrt();
        let weights = Tensor::from_fn(vec![units, width], |_| rng.random_range(-limit..limit))?;
        Self::new(weights, Tensor::zeros(vec![units])?)
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Contiguous slices of the flat parameter vector, in storage order:
/// each block's kernels then biases, then the hidden and output layers'
/// weights then biases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub ranges: Vec<(String, Range<usize>)>,
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.ranges.last().map_or(0, |(_, r)| r.end)
    }
}

/// Per-block values kept by a training forward pass.
#[derive(Clone, Debug)]
struct BlockCache {
    layer: LayerCache,
    activated: Tensor,
    pool: PoolIndices,
}

/// Everything [`Model::backward`] needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    flat: Tensor,
    hidden: Tensor,
}

/// The block-stacked Self-ONN classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    geometry: Vec<BlockGeometry>,
    blocks: Vec<SelfOnnLayerParams>,
    hidden: DenseParams,
    output: DenseParams,
}

/// Deterministically initializes a model for `config` from `seed`.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    let geometry = config.geometry()?;
    let mut rng = seed::rng(seed, Stream::Init, 0);
    let mut blocks = Vec::with_capacity(geometry.len());
    for g in &geometry {
        blocks.push(SelfOnnLayerParams::init(
            config.q_order,
            g.out_channels,
            g.in_channels,
            g.kernel,
            &mut rng,
        )?);
    }
    let flat = config.flatten_len()?;
    let hidden = DenseParams::init(config.dense_units, flat, &mut rng)?;
    let output = DenseParams::init(config.classes, config.dense_units, &mut rng)?;
    Ok(Model {
        config: config.clone(),
        geometry,
        blocks,
        hidden,
        output,
    })
}

impl Model {
    /// Rebuilds a model from a flat parameter vector.
    pub fn from_flat(config: &ModelConfig, params: &[f64]) -> Result<Model> {
        let mut model = build_model(config, 0)?;
        model.set_flat(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[SelfOnnLayerParams] {
        &self.blocks
    }

    pub fn hidden(&self) -> &DenseParams {
        &self.hidden
    }

    pub fn output(&self) -> &DenseParams {
        &self.output
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.param_count()).sum::<usize>()
            + self.hidden.param_count()
            + self.output.param_count()
    }

    pub fn layout(&self) -> ParamLayout {
        let mut ranges = Vec::new();
        let mut at = 0;
        let mut push = |name: String, len: usize| {
            ranges.push((name, at..at + len));
            at += len;
        };
        for (i, b) in self.blocks.iter().enumerate() {
            push(format!("block{}.kernels", i + 1), b.kernels().len());
            push(format!("block{}.biases", i + 1), b.biases().len());
        }
        push("hidden.weights".into(), self.hidden.weights.len());
        push("hidden.bias".into(), self.hidden.bias.len());
        push("output.weights".into(), self.output.weights.len());
        push("output.bias".into(), self.output.bias.len());
        ParamLayout { ranges }
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(b.kernels());
            out.push(b.biases());
        }
        out.extend([
            &self.hidden.weights,
            &self.hidden.bias,
            &self.output.weights,
            &self.output.bias,
        ]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            let (k, bias) = b.params_mut();
            out.push(k);
            out.push(bias);
        }
        out.push(&mut self.hidden.weights);
        out.push(&mut self.hidden.bias);
        out.push(&mut self.output.weights);
        out.push(&mut self.output.bias);
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            flat.extend_from_slice(t.data());
        }
        flat
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "flat parameter vector has {} values, model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&params[at..at + n]);
            at += n;
        }
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.dims() != self.config.input_shape {
            return Err(Error::Dimension(format!(
                "model input {} does not match configured {:?}",
                input.shape(),
                self.config.input_shape
            )));
        }
        Ok(())
    }

    /// Inference forward pass returning the logits.
    pub fn predict_logits(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for block in &self.blocks {
            let activated = tanh_forward(&selfonn_forward(block, &x)?);
            x = maxpool2x2(&activated)?.0;
        }
        let hidden = tanh_forward(&dense_forward(&x, &self.hidden.weights, &self.hidden.bias)?);
        dense_forward(&hidden, &self.output.weights, &self.output.bias)
    }

    pub fn predict_class(&self, input: &Tensor) -> Result<usize> {
        Ok(self.predict_logits(input)?.argmax())
    }

    /// Training forward pass. Returns the logits and the cache for
    /// [`Model::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut x = input.clone();
        for block in &self.blocks {
            let (pre, layer) = selfonn_forward_cached(block, &x)?;
            let activated = tanh_forward(&pre);
            let (pooled, pool) = maxpool2x2(&activated)?;
            blocks.push(BlockCache {
                layer,
                activated,
                pool,
            });
            x = pooled;
        }
        let hidden = tanh_forward(&dense_forward(&x, &self.hidden.weights, &self.hidden.bias)?);
        let logits = dense_forward(&hidden, &self.output.weights, &self.output.bias)?;
        Ok((
            logits,
            ForwardCache {
                blocks,
                flat: x,
                hidden,
            },
        ))
    }

    /// Gradient of the loss with respect to the flat parameter vector, given
    /// the gradient with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor) -> Result<Vec<f64>> {
        Ok(self.backward_impl(cache, grad_logits, false)?.0)
    }

    /// Like [`Model::backward`] but also returns the gradient with respect to
    /// the model input.
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache,
        grad_logits: &Tensor,
    ) -> Result<(Vec<f64>, Tensor)> {
        let (params, input) = self.backward_impl(cache, grad_logits, true)?;
        Ok((params, input.expect("input gradient requested")))
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        grad_logits: &Tensor,
        need_input: bool,
    ) -> Result<(Vec<f64>, Option<Tensor>)> {
        if cache.blocks.len() != self.blocks.len() {
            return Err(Error::Consistency(format!(
                "cache has {} blocks, model has {}",
                cache.blocks.len(),
                self.blocks.len()
            )));
        }
        let out_grads = dense_backward(&cache.hidden, &self.output.weights, &self.output.bias, grad_logits)?;
        let hidden_pre = tanh_backward(&cache.hidden, &out_grads.input)?;
        let hidden_grads = dense_backward(&cache.flat, &self.hidden.weights, &self.hidden.bias, &hidden_pre)?;

        let mut block_grads = Vec::with_capacity(self.blocks.len());
        let mut upstream = hidden_grads.input;
        for (i, (block, bc)) in self.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            let g_act = maxpool2x2_backward(&upstream, &bc.pool, bc.activated.shape())?;
            let g_pre = tanh_backward(&bc.activated, &g_act)?;
            let grads = layer::backward(block, &bc.layer, &g_pre, i > 0 || need_input)?;
            if let Some(g) = &grads.input {
                upstream = g.clone();
            }
            block_grads.push((grads.kernels, grads.biases, grads.input));
        }
        block_grads.reverse();

        let mut flat = Vec::with_capacity(self.param_count());
        let mut input_grad = None;
        for (i, (k, b, gi)) in block_grads.into_iter().enumerate() {
            flat.extend_from_slice(k.data());
            flat.extend_from_slice(b.data());
            if i == 0 {
                input_grad = gi;
            }
        }
        flat.extend_from_slice(hidden_grads.weights.data());
        flat.extend_from_slice(hidden_grads.bias.data());
        flat.extend_from_slice(out_grads.weights.data());
        flat.extend_from_slice(out_grads.bias.data());
        Ok((flat, input_grad))
    }

    pub fn geometry(&self) -> &[BlockGeometry] {
        &self.geometry
    }
}
