//! Seeded synthetic thermal frames.
//!
//! Each frame is an ambient background plus a class-specific hotspot
//! pattern, rescaled so its pixel temperatures have the class mean and
//! standard deviation, clamped to the class range, and quantized onto the
//! camera span of −40 °C to 550 °C.
//!
//! | class        | pattern                                         |
//! |--------------|-------------------------------------------------|
//! | healthy      | one round hotspot near the frame centre          |
//! | misalignment | two smaller hotspots on an off-axis diagonal     |
//! | broken rotor | one elongated, steep-sided hot band              |

use std::fs;
use std::path::Path;

use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{ClassLabel, DatasetManifest};
use super::pgm::{write_pgm16, ThermalImage};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

pub const CAMERA_MIN_C: f64 = -40.0;
pub const CAMERA_MAX_C: f64 = 550.0;

/// Maps a temperature onto the 16-bit camera scale (rounded, saturating).
pub fn celsius_to_raw(t: f64) -> u16 {
    let x = (t - CAMERA_MIN_C) / (CAMERA_MAX_C - CAMERA_MIN_C) * 65535.0;
    x.round().clamp(0.0, 65535.0) as u16
}

pub fn raw_to_celsius(p: u16) -> f64 {
    CAMERA_MIN_C + p as f64 / 65535.0 * (CAMERA_MAX_C - CAMERA_MIN_C)
}

/// Per-class pixel temperature statistics in °C.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl ClassStats {
    /// Recorded statistics of the motor thermal dataset, indexed by class.
    pub const RECORDED: [ClassStats; 3] = [
        ClassStats { min: 23.00, max: 82.43, mean: 38.62, std: 8.86 },
        ClassStats { min: 25.52, max: 104.99, mean: 40.31, std: 12.04 },
        ClassStats { min: 24.86, max: 83.30, mean: 41.24, std: 11.09 },
    ];

    fn validate(&self) -> Result<()> {
        if !(self.min < self.mean && self.mean < self.max && self.std > 0.0) {
            return Err(Error::Config(format!(
                "class statistics need min < mean < max and std > 0: {self:?}"
            )));
        }
        if self.min < CAMERA_MIN_C || self.max > CAMERA_MAX_C {
            return Err(Error::Config(format!("class range {self:?} exceeds the camera span")));
        }
        Ok(())
    }
}

/// Hotspot placement and noise knobs. Lengths are fractions of the shorter
/// frame side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotspotGeometry {
    pub radius: f64,
    /// Uniform jitter of hotspot centres, as a fraction of each side.
    pub position_jitter: f64,
    /// Pixel noise relative to the hotspot peak.
    pub noise: f64,
    /// Uniform per-frame offset of the mean temperature, °C.
    pub mean_jitter_c: f64,
}

impl Default for HotspotGeometry {
    fn default() -> Self {
        HotspotGeometry {
            radius: 0.12,
            position_jitter: 0.08,
            noise: 0.03,
            mean_jitter_c: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Images per class, indexed by [`ClassLabel::index`].
    pub counts: [usize; 3],
    pub seed: u64,
    pub stats: [ClassStats; 3],
    pub geometry: HotspotGeometry,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 640,
            height: 512,
            counts: [100, 100, 100],
            seed: 0,
            stats: ClassStats::RECORDED,
            geometry: HotspotGeometry::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config(format!(
                "synthetic frames must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        for s in &self.stats {
            s.validate()?;
        }
        let g = &self.geometry;
        if !(g.radius > 0.0 && g.position_jitter >= 0.0 && g.noise >= 0.0 && g.mean_jitter_c >= 0.0) {
            return Err(Error::Config(format!("invalid hotspot geometry {g:?}")));
        }
        Ok(())
    }
}

struct Blob {
    cx: f64,
    cy: f64,
    sx: f64,
    sy: f64,
    angle: f64,
    amplitude: f64,
}

impl Blob {
    fn at(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.angle.sin_cos();
        let u = (c * dx + s * dy) / self.sx;
        let v = (-s * dx + c * dy) / self.sy;
        self.amplitude * (-0.5 * (u * u + v * v)).exp()
    }
}

/// Renders frame `ordinal` of `class`. Deterministic in the config seed.
pub fn render(cfg: &SynthConfig, class: ClassLabel, ordinal: usize) -> ThermalImage {
    let counter = ((class.index() as u32) << 24) | (ordinal as u32 & 0x00ff_ffff);
    let mut rng = seed::rng(cfg.seed, Stream::Synthesis, counter);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let g = cfg.geometry;
    let side = w.min(h);
    let r = g.radius * side;
    let mut jitter = |scale: f64| {
        if g.position_jitter > 0.0 {
            rng.random_range(-g.position_jitter..g.position_jitter) * scale
        } else {
            0.0
        }
    };
    let (jx, jy) = (jitter(w), jitter(h));
    let blobs = match class {
        ClassLabel::Healthy => vec![Blob {
            cx: 0.5 * w + jx,
            cy: 0.5 * h + jy,
            sx: r,
            sy: r,
            angle: 0.0,
            amplitude: 1.0,
        }],
        ClassLabel::Misalignment => {
            let (ox, oy) = (0.22 * w, 0.18 * h);
            vec![
                Blob { cx: 0.5 * w - ox + jx, cy: 0.5 * h - oy + jy, sx: 0.7 * r, sy: 0.7 * r, angle: 0.0, amplitude: 1.0 },
                Blob { cx: 0.5 * w + ox + jx, cy: 0.5 * h + oy + jy, sx: 0.7 * r, sy: 0.7 * r, angle: 0.0, amplitude: 0.85 },
            ]
        }
        ClassLabel::BrokenRotor => vec![Blob {
            cx: 0.5 * w + jx,
            cy: 0.5 * h + jy,
            sx: 2.5 * r,
            sy: 0.45 * r,
            angle: (ordinal % 7) as f64 * 0.04 - 0.12,
            amplitude: 1.0,
        }],
    };
    let tilt = rng.random_range(0.0..0.15);
    let noise = Normal::new(0.0, g.noise.max(f64::MIN_POSITIVE)).expect("finite noise scale");
    let mut field = Vec::with_capacity(cfg.width * cfg.height);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
            let hot: f64 = blobs.iter().map(|b| b.at(xf, yf)).sum();
            let ambient = tilt * (yf / h - 0.5);
            let n = if g.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            field.push(hot + ambient + n);
        }
    }
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let std = (field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt().max(1e-12);
    let stats = cfg.stats[class.index()];
    let offset = if g.mean_jitter_c > 0.0 {
        rng.random_range(-g.mean_jitter_c..g.mean_jitter_c)
    } else {
        0.0
    };
    let pixels = field
        .iter()
        .map(|v| {
            let t = stats.mean + offset + stats.std * (v - mean) / std;
            celsius_to_raw(t.clamp(stats.min, stats.max))
        })
        .collect();
    ThermalImage::new(cfg.width, cfg.height, pixels).expect("dimensions checked by validate")
}

/// Observed temperature statistics of one generated class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedClassStats {
    pub class: ClassLabel,
    pub images: usize,
    pub mean_c: f64,
    pub std_c: f64,
    pub min_c: f64,
    pub max_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub config: SynthConfig,
    pub classes: Vec<GeneratedClassStats>,
}

/// Pixel temperature statistics over a set of frames.
pub fn temperature_stats(class: ClassLabel, images: &[ThermalImage]) -> GeneratedClassStats {
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for img in images {
        for &p in img.pixels() {
            let t = raw_to_celsius(p);
            sum += t;
            sq += t * t;
            n += 1;
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    let mean = sum / n.max(1) as f64;
    GeneratedClassStats {
        class,
        images: images.len(),
        mean_c: mean,
        std_c: (sq / n.max(1) as f64 - mean * mean).max(0.0).sqrt(),
        min_c: lo,
        max_c: hi,
    }
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Writes `<out>/<class>/<ordinal:05>.pgm` for every frame plus
/// `<out>/manifest.tsv`, classes in label order.
pub fn synth_generate(cfg: &SynthConfig, out: &Path) -> Result<(DatasetManifest, SynthReport)> {
    cfg.validate()?;
    let mut manifest = DatasetManifest::default();
    let mut classes = Vec::new();
    for class in ClassLabel::ALL {
        let dir = out.join(class.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for ordinal in 0..cfg.counts[class.index()] {
            let img = render(cfg, class, ordinal);
            let s = temperature_stats(class, std::slice::from_ref(&img));
            let px = img.pixels().len() as f64;
            sum += s.mean_c * px;
            sq += (s.std_c * s.std_c + s.mean_c * s.mean_c) * px;
            n += img.pixels().len();
            lo = lo.min(s.min_c);
            hi = hi.max(s.max_c);
            let rel = Path::new(class.name()).join(format!("{ordinal:05}.pgm"));
            write_pgm16(&img, &out.join(&rel))?;
            manifest.push(rel, class)?;
        }
        let mean = sum / n.max(1) as f64;
        classes.push(GeneratedClassStats {
            class,
            images: cfg.counts[class.index()],
            mean_c: mean,
            std_c: (sq / n.max(1) as f64 - mean * mean).max(0.0).sqrt(),
            min_c: lo,
            max_c: hi,
        });
    }
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok((
        manifest,
        SynthReport {
            config: cfg.clone(),
            classes,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(counts: [usize; 3]) -> SynthConfig {
        SynthConfig {
            width: 80,
            height: 64,
            counts,
            seed: 7,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn raw_scale_round_trips() {
        assert_eq!(celsius_to_raw(-40.0), 0);
        assert_eq!(celsius_to_raw(550.0), 65535);
        for t in [23.0, 38.62, 104.99] {
            assert!((raw_to_celsius(celsius_to_raw(t)) - t).abs() < 0.005);
        }
    }

    #[test]
    fn deterministic_render() {
        let cfg = small([1, 1, 1]);
        for c in ClassLabel::ALL {
            assert_eq!(render(&cfg, c, 3), render(&cfg, c, 3));
            assert_ne!(render(&cfg, c, 3), render(&cfg, c, 4));
        }
    }

    #[test]
    fn class_statistics_track_targets() {
        let cfg = small([0; 3]);
        for c in ClassLabel::ALL {
            let frames: Vec<ThermalImage> = (0..200).map(|i| render(&cfg, c, i)).collect();
            let s = temperature_stats(c, &frames);
            let target = cfg.stats[c.index()];
            assert!((s.mean_c - target.mean).abs() <= 1.5, "{c}: {s:?}");
            // Quantization may land a hair outside the clamp bounds.
            assert!(s.min_c >= target.min - 0.01 && s.max_c <= target.max + 0.01, "{c}: {s:?}");
        }
    }

    #[test]
    fn invalid_config() {
        let mut cfg = small([1; 3]);
        cfg.stats[0].std = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small([1; 3]);
        cfg.width = 4;
        assert!(cfg.validate().is_err());
    }
}
