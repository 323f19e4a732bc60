use std::hint::black_box;
use std::time::Instant;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};
use crate::selfonn::Model;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub runs: usize,
    pub warmup: usize,
    /// Root seed of the fixed input frame.
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            runs: 100,
            warmup: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub q_order: u32,
    pub params: usize,
    pub runs: usize,
    pub warmup: usize,
    pub durations_ms: Vec<f64>,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Short identifier such as `selfonn-q2-1x256x320`.
pub fn model_id(model: &Model) -> String {
    let c = model.config();
    let [ch, h, w] = c.input_shape;
    format!("selfonn-q{}-{ch}x{h}x{w}", c.q_order)
}

/// Times single-frame inference on one thread. Warm-up passes are run
/// first and discarded.
pub fn bench_inference(model: &Model, opts: &BenchOptions) -> Result<BenchReport> {
    if opts.runs == 0 {
        return Err(Error::Config("benchmark needs at least one run".into()));
    }
    let mut rng = seed::rng(opts.seed, Stream::Bench, 0);
    let input = Tensor::from_fn(model.config().input_shape.to_vec(), |_| rng.random_range(0.0..1.0))?;
    for _ in 0..opts.warmup {
        black_box(model.predict_logits(black_box(&input))?);
    }
    let mut durations_ms = Vec::with_capacity(opts.runs);
    for _ in 0..opts.runs {
        let start = Instant::now();
        black_box(model.predict_logits(black_box(&input))?);
        durations_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let n = durations_ms.len() as f64;
    let min = durations_ms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = durations_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding in the sum can push the mean of equal samples past them.
    let mean = (durations_ms.iter().sum::<f64>() / n).clamp(min, max);
    let var = durations_ms.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(BenchReport {
        model: model_id(model),
        q_order: model.config().q_order,
        params: model.param_count(),
        runs: opts.runs,
        warmup: opts.warmup,
        durations_ms,
        mean_ms: mean,
        std_ms: var.sqrt(),
        min_ms: min,
        max_ms: max,
    })
}

impl BenchReport {
    pub fn render(&self) -> String {
        format!(
            "{} ({} params): {} runs after {} warm-up\n  mean {:.3} ms  std {:.3} ms  min {:.3} ms  max {:.3} ms\n",
            self.model, self.params, self.runs, self.warmup, self.mean_ms, self.std_ms, self.min_ms, self.max_ms
        )
    }
}

pub fn table_four_header() -> String {
    format!("{:<20}|{:>22} |{:>32}", "Model", "Trainable Parameters", "Average Inference Duration (ms)")
}

pub fn table_four_row(label: &str, params: usize, mean_ms: Option<f64>) -> String {
    let time = mean_ms.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
    format!("{label:<20}|{:>22} |{time:>32}", group_thousands(params))
}

/// `293027` → `293,027`.
pub fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
