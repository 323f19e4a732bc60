use std::path::Path;

use super::manifest::DatasetManifest;
use super::pgm::{load_pgm16, ThermalImage};
use super::preprocess::{normalize, resize_half, NormalizationMode, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::training::Sample;

/// Brings a frame to `height × width`: unchanged if it already matches,
/// halved if it is exactly twice as large, rejected otherwise.
pub fn fit_to_input(img: ThermalImage, height: usize, width: usize) -> Result<ThermalImage> {
    match (img.height(), img.width()) {
        (h, w) if h == height && w == width => Ok(img),
        (h, w) if h == 2 * height && w == 2 * width => resize_half(&img),
        (h, w) => Err(Error::Input(format!(
            "{w}x{h} frame does not match model input {width}x{height} or twice it"
        ))),
    }
}

/// Loads, resizes and normalizes every manifest entry. Paths are resolved
/// against `root`.
pub fn load_samples(
    manifest: &DatasetManifest,
    root: &Path,
    input_shape: [usize; 3],
    mode: NormalizationMode,
) -> Result<Vec<Sample>> {
    if input_shape[0] != 1 {
        return Err(Error::Config(format!(
            "thermal frames have one channel, model expects {}",
            input_shape[0]
        )));
    }
    manifest
        .records()
        .iter()
        .map(|r| {
            let path = root.join(&r.path);
            let img = load_pgm16(&path).map_err(|e| match e {
                Error::Pgm(p) => Error::Input(format!("{}: {p}", path.display())),
                other => other,
            })?;
            let img = fit_to_input(img, input_shape[1], input_shape[2])
                .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            Ok(Sample {
                input: normalize(&img, mode, DEFAULT_EPSILON),
                label: r.label.index(),
            })
        })
        .collect()
}

/// Extrema over all frames, for [`NormalizationMode::DatasetWide`].
pub fn dataset_range(images: &[ThermalImage]) -> Option<(u16, u16)> {
    images
        .iter()
        .map(ThermalImage::min_max)
        .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)))
}
