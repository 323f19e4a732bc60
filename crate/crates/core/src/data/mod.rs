//! Thermal frames: file format, preprocessing, manifests, fold assignment
//! and synthetic generation.

mod dataset;
mod folds;
mod manifest;
mod pgm;
mod preprocess;
pub mod synth;

pub use dataset::{dataset_range, fit_to_input, load_samples};
pub use folds::{
    make_cv_splits, segment_sizes, stratified_ordered_kfold, CvSplit, FoldPlan, RemainderPlacement,
};
pub use manifest::{ClassLabel, DatasetManifest, SampleRecord};
pub use pgm::{encode_pgm16, load_pgm16, parse_pgm16, write_pgm16, ThermalImage};
pub use preprocess::{
    normalize, normalize_minmax, normalize_with_range, resize_half, NormalizationMode, DEFAULT_EPSILON,
};
pub use synth::{synth_generate, ClassStats, SynthConfig, SynthReport};
