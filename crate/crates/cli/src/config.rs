//! Run configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.
//!
//! Every key is optional. The full schema:
//!
//! ```toml
//! seed = 0                      # root seed for synthesis, init and batching
//!
//! [paths]
//! data = "data"                 # corpus root; manifest paths are relative to it
//! manifest = "data/manifest.tsv"
//! plan = "runs/folds.tsv"       # fold plan; computed from the manifest if absent
//! out = "runs"                  # artifact directory
//! weights = "runs/fold1/weights.sonn"
//!
//! [model]
//! preset = "paper"              # paper | desk | reduced; fields below override it
//! q_order = 1
//! input_shape = [1, 256, 320]
//! filters = [8, 8, 8]
//! kernel_sizes = [5, 3, 2]
//! dense_units = 32
//! classes = 3
//!
//! [train]
//! initial_lr = 0.001
//! batch_size = 16
//! max_epochs = 300
//! shuffle = true
//! min_delta = 0.0
//! lr_factor = 0.5
//! lr_patience = 3
//! min_lr = 0.00005
//! early_stop_patience = 5
//!
//! [data]
//! normalization = "per_image"   # per_image | dataset_wide
//! norm_min = 0                  # dataset_wide bounds (raw 16-bit values)
//! norm_max = 65535
//! k = 5
//! folds = "all"                 # "all" or a 1-based test fold
//! std = "population"            # population | sample
//!
//! [synth]
//! width = 640
//! height = 512
//! per_class = 100
//!
//! [bench]
//! runs = 100
//! warmup = 10
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use selfonn_core::data::{NormalizationMode, SynthConfig};
use selfonn_core::metrics::{BenchOptions, StdConvention};
use selfonn_core::selfonn::ModelConfig;
use selfonn_core::training::TrainConfig;

use crate::exit::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldSelection {
    All,
    /// 1-based test fold.
    One(usize),
}

impl FromStr for FoldSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(FoldSelection::All);
        }
        match s.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(FoldSelection::One(i)),
            _ => Err(format!("expected \"all\" or a fold number from 1, got {s:?}")),
        }
    }
}

impl fmt::Display for FoldSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldSelection::All => f.write_str("all"),
            FoldSelection::One(i) => write!(f, "{i}"),
        }
    }
}

impl<'de> Deserialize<'de> for FoldSelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => n.to_string().parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    PerImage,
    DatasetWide,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<Preset>,
    pub q_order: Option<u32>,
    pub input_shape: Option<[usize; 3]>,
    pub filters: Option<Vec<usize>>,
    pub kernel_sizes: Option<Vec<usize>>,
    pub dense_units: Option<usize>,
    pub classes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub initial_lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub shuffle: Option<bool>,
    pub min_delta: Option<f64>,
    pub lr_factor: Option<f64>,
    pub lr_patience: Option<usize>,
    pub min_lr: Option<f64>,
    pub early_stop_patience: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub normalization: Option<NormKind>,
    pub norm_min: Option<u16>,
    pub norm_max: Option<u16>,
    pub k: Option<usize>,
    pub folds: Option<FoldSelection>,
    pub std: Option<StdConvention>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub per_class: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub runs: Option<usize>,
    pub warmup: Option<usize>,
}

/// The config file as written: every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub bench: BenchSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }
}

/// Values given on the command line. `None` defers to the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub q: Option<u32>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub folds: Option<FoldSelection>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub runs: Option<usize>,
    pub warmup: Option<usize>,
    pub per_class: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data_dir: PathBuf,
    pub manifest: PathBuf,
    pub plan: Option<PathBuf>,
    pub out: PathBuf,
    pub weights: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub normalization: NormalizationMode,
    pub k: usize,
    /// `None` lets each command pick its own default.
    pub folds: Option<FoldSelection>,
    pub std: StdConvention,
    pub synth: SynthConfig,
    pub bench: BenchOptions,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: &Overrides) -> Result<RunConfig, CliError> {
        let seed = flags.seed.or(file.seed).unwrap_or(0);

        let data_dir = flags.data.clone().or(file.paths.data).unwrap_or_else(|| "data".into());
        let manifest = flags
            .manifest
            .clone()
            .or(file.paths.manifest)
            .unwrap_or_else(|| data_dir.join("manifest.tsv"));

        let m = file.model;
        let preset = flags.preset.or(m.preset).unwrap_or(Preset::Paper);
        let mut model = match preset {
            Preset::Paper => ModelConfig::paper(1),
            Preset::Desk => ModelConfig::desk(1),
            Preset::Reduced => ModelConfig::reduced(1),
        };
        model.q_order = flags.q.or(m.q_order).unwrap_or(1);
        if let Some(v) = m.input_shape {
            model.input_shape = v;
        }
        if let Some(v) = m.filters {
            model.filters = v;
        }
        if let Some(v) = m.kernel_sizes {
            model.kernel_sizes = v;
        }
        if let Some(v) = m.dense_units {
            model.dense_units = v;
        }
        if let Some(v) = m.classes {
            model.classes = v;
        }
        model.geometry().map_err(CliError::from)?;

        let t = file.train;
        let d = TrainConfig::default();
        let train = TrainConfig {
            initial_lr: flags.lr.or(t.initial_lr).unwrap_or(d.initial_lr),
            batch_size: flags.batch.or(t.batch_size).unwrap_or(d.batch_size),
            max_epochs: flags.epochs.or(t.max_epochs).unwrap_or(d.max_epochs),
            seed,
            shuffle: t.shuffle.unwrap_or(d.shuffle),
            min_delta: t.min_delta.unwrap_or(d.min_delta),
            lr_factor: t.lr_factor.unwrap_or(d.lr_factor),
            lr_patience: t.lr_patience.unwrap_or(d.lr_patience),
            min_lr: t.min_lr.unwrap_or(d.min_lr),
            early_stop_patience: t.early_stop_patience.unwrap_or(d.early_stop_patience),
            adam: d.adam,
        };
        train.validate().map_err(CliError::from)?;

        let dd = file.data;
        let normalization = match dd.normalization.unwrap_or(NormKind::PerImage) {
            NormKind::PerImage => NormalizationMode::PerImage,
            NormKind::DatasetWide => {
                let (min, max) = (dd.norm_min.unwrap_or(0), dd.norm_max.unwrap_or(u16::MAX));
                if min >= max {
                    return Err(CliError::usage(format!("norm_min {min} must be below norm_max {max}")));
                }
                NormalizationMode::DatasetWide { min, max }
            }
        };
        let k = dd.k.unwrap_or(5);
        if k < 2 {
            return Err(CliError::usage(format!("k must be at least 2, got {k}")));
        }
        let folds = flags.folds.or(dd.folds);
        if let Some(FoldSelection::One(i)) = folds {
            if i > k {
                return Err(CliError::usage(format!("fold {i} is outside 1..={k}")));
            }
        }

        let s = file.synth;
        let ds = SynthConfig::default();
        let per_class = flags.per_class.or(s.per_class);
        let synth = SynthConfig {
            width: flags.width.or(s.width).unwrap_or(ds.width),
            height: flags.height.or(s.height).unwrap_or(ds.height),
            counts: per_class.map_or(ds.counts, |n| [n; 3]),
            seed,
            ..ds
        };

        let b = file.bench;
        let db = BenchOptions::default();
        let bench = BenchOptions {
            runs: flags.runs.or(b.runs).unwrap_or(db.runs),
            warmup: flags.warmup.or(b.warmup).unwrap_or(db.warmup),
            seed,
        };
        if bench.runs == 0 {
            return Err(CliError::usage("bench runs must be at least 1"));
        }

        Ok(RunConfig {
            seed,
            data_dir,
            manifest,
            plan: flags.plan.clone().or(file.paths.plan),
            out: flags.out.clone().or(file.paths.out).unwrap_or_else(|| "runs".into()),
            weights: flags.weights.clone().or(file.paths.weights),
            model,
            train,
            normalization,
            k,
            folds,
            std: dd.std.unwrap_or_default(),
            synth,
            bench,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(c.model, ModelConfig::paper(1));
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.manifest, PathBuf::from("data/manifest.tsv"));
        assert_eq!(c.k, 5);
        assert_eq!(c.folds, None);
        assert_eq!(c.bench.runs, 100);
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = || {
            FileConfig::parse(
                "seed = 9\n[model]\npreset = \"desk\"\nq_order = 3\n[train]\nmax_epochs = 40\nbatch_size = 8\n[data]\nfolds = 2\n",
            )
            .unwrap()
        };
        let c = RunConfig::resolve(file(), &Overrides::default()).unwrap();
        assert_eq!((c.seed, c.model.q_order, c.train.max_epochs, c.train.batch_size), (9, 3, 40, 8));
        assert_eq!(c.model.input_shape, [1, 64, 80]);
        assert_eq!(c.folds, Some(FoldSelection::One(2)));
        assert_eq!(c.train.initial_lr, 0.001);

        let flags = Overrides {
            q: Some(2),
            seed: Some(4),
            epochs: Some(7),
            lr: Some(0.01),
            folds: Some(FoldSelection::All),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(file(), &flags).unwrap();
        assert_eq!((c.seed, c.model.q_order, c.train.max_epochs, c.train.batch_size), (4, 2, 7, 8));
        assert_eq!((c.train.initial_lr, c.train.seed, c.synth.seed), (0.01, 4, 4));
        assert_eq!(c.folds, Some(FoldSelection::All));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(FileConfig::parse("[model]\nq_ordr = 2\n").is_err());
        assert!(FileConfig::parse("[data]\nfolds = \"some\"\n").is_err());
        let bad_q = FileConfig::parse("[model]\nq_order = 11\n").unwrap();
        assert!(RunConfig::resolve(bad_q, &Overrides::default()).is_err());
        let bad_fold = FileConfig::parse("[data]\nfolds = 6\n").unwrap();
        assert!(RunConfig::resolve(bad_fold, &Overrides::default()).is_err());
    }

    #[test]
    fn normalization_modes() {
        let f = FileConfig::parse("[data]\nnormalization = \"dataset_wide\"\nnorm_max = 4000\n").unwrap();
        let c = RunConfig::resolve(f, &Overrides::default()).unwrap();
        assert_eq!(c.normalization, NormalizationMode::DatasetWide { min: 0, max: 4000 });
    }
}
