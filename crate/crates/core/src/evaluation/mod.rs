//! Metrics (ROC AUC first, plus accuracy, precision, recall and average
//! precision) and per-subpopulation curves over sweep results.

mod curves;
mod metrics;

pub use curves::{build_curves, write_curves_csv, Curve, CurvePoint};
pub use metrics::{average_precision, metric_suite, roc_auc, Metric, MetricReport, DEFAULT_THRESHOLD};
