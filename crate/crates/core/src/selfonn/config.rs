use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest Taylor order accepted from configuration.
pub const MAX_Q_ORDER: u32 = 10;

/// Architecture of the block-stacked Self-ONN classifier.
///
/// Each block is a generative convolution followed by tanh and 2×2
/// max-pooling. The pooled map is flattened into a tanh dense layer and a
/// linear output layer over `classes` logits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub q_order: u32,
    /// `[channels, height, width]`.
    pub input_shape: [usize; 3],
    pub filters: Vec<usize>,
    pub kernel_sizes: Vec<usize>,
    pub dense_units: usize,
    pub classes: usize,
}

/// Spatial bookkeeping for one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub input_hw: (usize, usize),
    pub conv_hw: (usize, usize),
    pub pooled_hw: (usize, usize),
}

impl BlockGeometry {
    pub fn kernel_params(&self, q: u32) -> usize {
        q as usize * self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn bias_params(&self, q: u32) -> usize {
        q as usize * self.out_channels
    }
}

impl ModelConfig {
    /// The full-resolution architecture: 1×256×320 input, three blocks of 8
    /// filters with 5×5, 3×3 and 2×2 kernels, a 32-unit hidden layer and 3
    /// classes.
    pub fn paper(q_order: u32) -> Self {
        ModelConfig {
            q_order,
            input_shape: [1, 256, 320],
            filters: vec![8, 8, 8],
            kernel_sizes: vec![5, 3, 2],
            dense_units: 32,
            classes: 3,
        }
    }

    /// Tiny configuration used for finite-difference checks. The 16×16 input
    /// cannot carry a 5×5 first kernel through three poolings, so the kernels
    /// are 3×3, 2×2, 2×2.
    pub fn reduced(q_order: u32) -> Self {
        ModelConfig {
            q_order,
            input_shape: [1, 16, 16],
            filters: vec![2, 2, 2],
            kernel_sizes: vec![3, 2, 2],
            dense_units: 4,
            classes: 3,
        }
    }

    /// Desk-scale configuration for 64×80 inputs (half of a 128×160 frame).
    pub fn desk(q_order: u32) -> Self {
        ModelConfig {
            q_order,
            input_shape: [1, 64, 80],
            filters: vec![4, 4, 4],
            kernel_sizes: vec![5, 3, 2],
            dense_units: 16,
            classes: 3,
        }
    }

    pub fn with_q(&self, q_order: u32) -> Self {
        ModelConfig {
            q_order,
            ..self.clone()
        }
    }

    /// Checks every field and propagates spatial sizes through the block
    /// chain.
    pub fn geometry(&self) -> Result<Vec<BlockGeometry>> {
        if self.q_order == 0 || self.q_order > MAX_Q_ORDER {
            return Err(Error::Config(format!(
                "q_order must be in [1, {MAX_Q_ORDER}], got {}",
                self.q_order
            )));
        }
        if self.input_shape.contains(&0) {
            return Err(Error::Config(format!(
                "input shape {:?} has a zero extent",
                self.input_shape
            )));
        }
        if self.filters.is_empty() || self.filters.len() != self.kernel_sizes.len() {
            return Err(Error::Config(format!(
                "need one kernel size per block: {} filter counts, {} kernel sizes",
                self.filters.len(),
                self.kernel_sizes.len()
            )));
        }
        if self.filters.iter().chain(&self.kernel_sizes).any(|&v| v == 0) {
            return Err(Error::Config("filter counts and kernel sizes must be positive".into()));
        }
        if self.dense_units == 0 {
            return Err(Error::Config("dense_units must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }

        let [mut channels, mut h, mut w] = self.input_shape;
        let mut blocks = Vec::with_capacity(self.filters.len());
        for (i, (&out_channels, &k)) in self.filters.iter().zip(&self.kernel_sizes).enumerate() {
            if h < k || w < k {
                return Err(Error::Config(format!(
                    "block {}: {h}x{w} map is smaller than its {k}x{k} kernel",
                    i + 1
                )));
            }
            let conv_hw = (h - k + 1, w - k + 1);
            if conv_hw.0 < 2 || conv_hw.1 < 2 {
                return Err(Error::Config(format!(
                    "block {}: {}x{} convolution output is too small to pool",
                    i + 1,
                    conv_hw.0,
                    conv_hw.1
                )));
            }
            let pooled_hw = (conv_hw.0 / 2, conv_hw.1 / 2);
            blocks.push(BlockGeometry {
                in_channels: channels,
                out_channels,
                kernel: k,
                input_hw: (h, w),
                conv_hw,
                pooled_hw,
            });
            channels = out_channels;
            (h, w) = pooled_hw;
        }
        Ok(blocks)
    }

    /// Length of the flattened feature vector entering the dense head.
    pub fn flatten_len(&self) -> Result<usize> {
        let blocks = self.geometry()?;
        let last = blocks.last().expect("geometry has at least one block");
        Ok(last.out_channels * last.pooled_hw.0 * last.pooled_hw.1)
    }
}

/// Trainable parameter count, in closed form from the shape chain.
pub fn param_count(config: &ModelConfig) -> Result<usize> {
    let q = config.q_order;
    let blocks = config.geometry()?;
    let conv: usize = blocks
        .iter()
        .map(|b| b.kernel_params(q) + b.bias_params(q))
        .sum();
    let flat = config.flatten_len()?;
    let dense = flat * config.dense_units + config.dense_units;
    let head = config.dense_units * config.classes + config.classes;
    Ok(conv + dense + head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_shape_chain() {
        let g = ModelConfig::paper(1).geometry().unwrap();
        let conv: Vec<_> = g.iter().map(|b| b.conv_hw).collect();
        let pooled: Vec<_> = g.iter().map(|b| b.pooled_hw).collect();
        assert_eq!(conv, [(252, 316), (124, 156), (61, 77)]);
        assert_eq!(pooled, [(126, 158), (62, 78), (30, 38)]);
        assert_eq!(ModelConfig::paper(1).flatten_len().unwrap(), 9120);
    }

    #[test]
    fn paper_counts() {
        let expected = [293_027, 294_083, 295_139, 296_195, 297_251];
        for (q, want) in (1..=5).zip(expected) {
            assert_eq!(param_count(&ModelConfig::paper(q)).unwrap(), want, "Q={q}");
        }
    }

    #[test]
    fn reduced_count_matches_hand_count() {
        // 16x16 -(3x3)-> 14x14 -pool-> 7x7 -(2x2)-> 6x6 -pool-> 3x3 -(2x2)-> 2x2 -pool-> 1x1
        // block 1: 2*1*3*3 + 2 = 20, block 2: 2*2*2*2 + 2 = 18, block 3: 18
        // flatten 2*1*1 = 2, dense 2*4 + 4 = 12, head 4*3 + 3 = 15
        assert_eq!(param_count(&ModelConfig::reduced(1)).unwrap(), 20 + 18 + 18 + 12 + 15);
        assert_eq!(param_count(&ModelConfig::reduced(3)).unwrap(), 3 * 56 + 27);
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::paper(0);
        assert!(matches!(c.geometry(), Err(Error::Config(_))));
        c.q_order = 11;
        assert!(c.geometry().is_err());
        let mut c = ModelConfig::paper(1);
        c.input_shape = [1, 16, 16];
        assert!(matches!(param_count(&c), Err(Error::Config(_))));
        let mut c = ModelConfig::paper(1);
        c.kernel_sizes.pop();
        assert!(c.geometry().is_err());
        let mut c = ModelConfig::paper(1);
        c.classes = 1;
        assert!(c.geometry().is_err());
    }
}
