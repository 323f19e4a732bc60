//! Confusion matrices, precision/recall/F1 with macro and support-weighted
//! averages, cross-fold aggregation and the inference latency benchmark.

mod bench;
mod confusion;
mod report;

pub use bench::{
    bench_inference, group_thousands, model_id, table_four_header, table_four_row, BenchOptions, BenchReport,
};
pub use confusion::{confusion, ConfusionMatrix};
pub use report::{
    aggregate_folds, metric_report, table_three_header, table_three_row, Averages, ClassMetrics, FoldAggregate,
    MetricReport, StdConvention, Summary,
};
