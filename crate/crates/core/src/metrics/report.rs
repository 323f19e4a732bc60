use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};

/// One-vs-rest metrics of a single class. A metric whose denominator is
/// zero is reported as 0 and its flag is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    /// Averages weighted by class support. These are the headline figures.
    pub weighted: Averages,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metric_report(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Input("metrics need at least one evaluated sample".into()));
    }
    let supports = cm.supports();
    let predicted = cm.predicted();
    let per_class: Vec<ClassMetrics> = (0..cm.k())
        .map(|i| {
            let tp = cm.get(i, i);
            let fp = predicted[i] - tp;
            let fn_ = supports[i] - tp;
            let (precision, precision_undefined) = ratio(tp, tp + fp);
            let (recall, recall_undefined) = ratio(tp, tp + fn_);
            let (f1, f1_undefined) = if precision + recall > 0.0 {
                (2.0 * precision * recall / (precision + recall), false)
            } else {
                (0.0, true)
            };
            ClassMetrics {
                tp,
                fp,
                fn_,
                tn: total - tp - fp - fn_,
                support: supports[i],
                precision,
                recall,
                f1,
                precision_undefined,
                recall_undefined,
                f1_undefined,
            }
        })
        .collect();
    let k = per_class.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|c| c.support as f64 * f(c)).sum::<f64>() / total as f64
    };
    // support·(tp/support) collapses to tp; summing counts keeps the
    // identity with accuracy exact instead of up to rounding.
    let weighted_recall = per_class.iter().map(|c| c.tp).sum::<u64>() as f64 / total as f64;
    Ok(MetricReport {
        confusion: cm.clone(),
        accuracy: cm.trace() as f64 / total as f64,
        macro_avg: Averages {
            precision: mean(|c| c.precision),
            recall: mean(|c| c.recall),
            f1: mean(|c| c.f1),
        },
        weighted: Averages {
            precision: weighted(|c| c.precision),
            recall: weighted_recall,
            f1: weighted(|c| c.f1),
        },
        per_class,
    })
}

/// Divisor used for the cross-fold standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1 (0 for a single fold).
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64], convention: StdConvention) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let den = match convention {
            StdConvention::Population => n,
            StdConvention::Sample => n - 1.0,
        };
        Summary {
            mean,
            std: if den > 0.0 { (ss / den).sqrt() } else { 0.0 },
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAggregate {
    pub convention: StdConvention,
    pub folds: Vec<MetricReport>,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub macro_precision: Summary,
    pub macro_recall: Summary,
    pub macro_f1: Summary,
}

pub fn aggregate_folds(reports: &[MetricReport], convention: StdConvention) -> Result<FoldAggregate> {
    if reports.is_empty() {
        return Err(Error::Input("no fold reports to aggregate".into()));
    }
    let s = |f: &dyn Fn(&MetricReport) -> f64| Summary::of(&reports.iter().map(f).collect::<Vec<_>>(), convention);
    Ok(FoldAggregate {
        convention,
        accuracy: s(&|r| r.accuracy),
        precision: s(&|r| r.weighted.precision),
        recall: s(&|r| r.weighted.recall),
        f1: s(&|r| r.weighted.f1),
        macro_precision: s(&|r| r.macro_avg.precision),
        macro_recall: s(&|r| r.macro_avg.recall),
        macro_f1: s(&|r| r.macro_avg.f1),
        folds: reports.to_vec(),
    })
}

impl MetricReport {
    /// Per-class table followed by the accuracy and both averages.
    pub fn render(&self, titles: &[&str]) -> String {
        let mut s = format!(
            "{:<14}{:>11}{:>11}{:>11}{:>9}\n",
            "class", "precision", "recall", "f1", "support"
        );
        for (i, c) in self.per_class.iter().enumerate() {
            let flag = |v: f64, undefined: bool| format!("{v:.4}{}", if undefined { "*" } else { " " });
            s.push_str(&format!(
                "{:<14}{:>11}{:>11}{:>11}{:>9}\n",
                titles.get(i).copied().unwrap_or("?"),
                flag(c.precision, c.precision_undefined),
                flag(c.recall, c.recall_undefined),
                flag(c.f1, c.f1_undefined),
                c.support
            ));
        }
        for (name, a) in [("macro avg", self.macro_avg), ("weighted avg", self.weighted)] {
            s.push_str(&format!(
                "{name:<14}{:>10.4} {:>10.4} {:>10.4} {:>9}\n",
                a.precision,
                a.recall,
                a.f1,
                self.confusion.total()
            ));
        }
        s.push_str(&format!("accuracy      {:.4}\n", self.accuracy));
        if self.per_class.iter().any(|c| c.precision_undefined || c.recall_undefined || c.f1_undefined) {
            s.push_str("* zero denominator, reported as 0\n");
        }
        s
    }
}

/// Column header matching [`table_three_row`].
pub fn table_three_header() -> String {
    format!(
        "{:<20}|{:^17}|{:^17}|{:^17}|{:^17}",
        "Model", "Accuracy", "F1-Score", "Precision", "Recall"
    )
}

/// One `mean ± std` row with weighted averages.
pub fn table_three_row(model: &str, agg: &FoldAggregate) -> String {
    let cell = |s: Summary| format!("{:.3} ± {:.3}", s.mean, s.std);
    format!(
        "{model:<20}|{:^17}|{:^17}|{:^17}|{:^17}",
        cell(agg.accuracy),
        cell(agg.f1),
        cell(agg.precision),
        cell(agg.recall)
    )
}
