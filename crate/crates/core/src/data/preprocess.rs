use serde::{Deserialize, Serialize};

use super::pgm::ThermalImage;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Halves both dimensions by averaging each 2×2 block, rounding halves up.
pub fn resize_half(img: &ThermalImage) -> Result<ThermalImage> {
    let (w, h) = (img.width(), img.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::Input(format!("resize_half needs even dimensions, got {w}x{h}")));
    }
    let (wo, ho) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(wo * ho);
    for i in 0..ho {
        for j in 0..wo {
            let sum = img.get(2 * i, 2 * j) as u32
                + img.get(2 * i, 2 * j + 1) as u32
                + img.get(2 * i + 1, 2 * j) as u32
                + img.get(2 * i + 1, 2 * j + 1) as u32;
            out.push(((sum + 2) / 4) as u16);
        }
    }
    ThermalImage::new(wo, ho, out)
}

/// Which min/max feed the min-max scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Each image's own extrema.
    #[default]
    PerImage,
    /// Fixed extrema shared by the whole dataset.
    DatasetWide { min: u16, max: u16 },
}

/// `(p − min) / (max − min + ε)` with the image's own extrema, as a
/// `[1, height, width]` tensor.
pub fn normalize_minmax(img: &ThermalImage, epsilon: f64) -> Tensor {
    let (lo, hi) = img.min_max();
    normalize_with_range(img, lo, hi, epsilon)
}

/// Min-max scaling with caller-supplied extrema. Pixels outside the range
/// are not clipped.
pub fn normalize_with_range(img: &ThermalImage, min: u16, max: u16, epsilon: f64) -> Tensor {
    let lo = min as f64;
    let span = max as f64 - lo + epsilon;
    Tensor::from_fn(vec![1, img.height(), img.width()], |i| {
        (img.pixels()[i] as f64 - lo) / span
    })
    .expect("image dimensions are non-zero")
}

pub fn normalize(img: &ThermalImage, mode: NormalizationMode, epsilon: f64) -> Tensor {
    match mode {
        NormalizationMode::PerImage => normalize_minmax(img, epsilon),
        NormalizationMode::DatasetWide { min, max } => normalize_with_range(img, min, max, epsilon),
    }
}
