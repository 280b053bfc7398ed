use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Default decision threshold for the thresholded metrics.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RocAuc,
    Accuracy,
    Precision,
    Recall,
    PrAuc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::RocAuc,
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::PrAuc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RocAuc => "roc_auc",
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::PrAuc => "pr_auc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// All five metrics for one evaluation. `precision` is `None` when nothing
/// was predicted positive at the threshold. `pr_auc` is average precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub roc_auc: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub pr_auc: f64,
    pub threshold: f64,
    pub n_test: usize,
    pub positives_in_test: usize,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::RocAuc => Some(self.roc_auc),
            Metric::Accuracy => Some(self.accuracy),
            Metric::Precision => self.precision,
            Metric::Recall => Some(self.recall),
            Metric::PrAuc => Some(self.pr_auc),
        }
    }
}

fn check_inputs<F: Scalar>(labels: &[u8], scores: &[F]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::Config(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::MetricUndefined("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&y| y != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::MetricUndefined(format!(
            "ROC AUC needs both classes ({pos} positives, {neg} negatives)"
        )));
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, with
/// tied pairs credited one half (Mann-Whitney statistic).
pub fn roc_auc<F: Scalar>(labels: &[u8], scores: &[F]) -> Result<f64> {
    let (pos, neg) = check_inputs(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // twice the credit, kept integral
    let mut credit2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] != 0 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        credit2 += p * (2 * neg_below + n);
        neg_below += n;
        i = j;
    }
    Ok(credit2 as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Average precision: sum over distinct thresholds (descending) of the
/// recall increment times the precision at that threshold.
pub fn average_precision<F: Scalar>(labels: &[u8], scores: &[F]) -> Result<f64> {
    let (pos, _) = check_inputs(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// ROC AUC, accuracy, precision, recall and average precision at `threshold`
/// (a row is predicted positive when its score is at least the threshold).
pub fn metric_suite<F: Scalar>(labels: &[u8], scores: &[F], threshold: f64) -> Result<MetricReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold {threshold} outside [0, 1]")));
    }
    let roc_auc = roc_auc(labels, scores)?;
    let pr_auc = average_precision(labels, scores)?;
    let t = F::from_f64(threshold).unwrap();
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&y, &s) in labels.iter().zip(scores) {
        match (y != 0, s >= t) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fneg += 1,
        }
    }
    let n = labels.len();
    Ok(MetricReport {
        roc_auc,
        accuracy: (tp + tn) as f64 / n as f64,
        precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
        recall: tp as f64 / (tp + fneg) as f64,
        pr_auc,
        threshold,
        n_test: n,
        positives_in_test: tp + fneg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn bruteforce_ap(labels: &[u8], scores: &[f64]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let mut prev_r = 0.0;
        let mut area = 0.0;
        for t in thresholds {
            let tp = labels.iter().zip(scores).filter(|(&y, &s)| y == 1 && s >= t).count() as f64;
            let pp = scores.iter().filter(|&&s| s >= t).count() as f64;
            let r = tp / pos;
            area += (r - prev_r) * (tp / pp);
            prev_r = r;
        }
        area
    }

    #[test]
    fn worked_example() {
        let labels = [0, 0, 1, 1];
        let scores = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(roc_auc(&labels, &scores).unwrap(), 0.75);
        let r = metric_suite(&labels, &scores, 0.5).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.n_test, 4);
        assert_eq!(r.positives_in_test, 2);
    }

    #[test]
    fn perfect_and_tied() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0, 1], &[0.5, 0.5]).unwrap(), 0.5);
        let r = metric_suite(&[0u8, 0, 1, 1], &[0.1f64, 0.2, 0.7, 0.9], 0.5).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.pr_auc), (1.0, Some(1.0), 1.0, 1.0));
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_auc(&[1, 1], &[0.2, 0.3]), Err(Error::MetricUndefined(_))));
        assert!(matches!(roc_auc::<f64>(&[], &[]), Err(Error::MetricUndefined(_))));
    }

    #[test]
    fn no_predicted_positives_leaves_precision_undefined() {
        let r = metric_suite(&[0u8, 1], &[0.1f64, 0.2], 0.5).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, 0.0);
    }

    #[test]
    fn works_for_f32() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1f32, 0.4, 0.35, 0.8]).unwrap(), 0.75);
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("auc".parse::<Metric>().is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (2usize..60)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0u8..2, n),
                    proptest::collection::vec(0u8..8, n),
                )
            })
            .prop_filter("both classes", |(l, _)| l.contains(&0) && l.contains(&1))
            .prop_map(|(l, s)| (l, s.into_iter().map(|v| v as f64 / 8.0).collect()))
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle((labels, scores) in instance()) {
            let got = roc_auc(&labels, &scores).unwrap();
            prop_assert!((got - pairwise_auc(&labels, &scores)).abs() <= 1e-12);
        }

        #[test]
        fn ap_matches_rectangle_sum((labels, scores) in instance()) {
            let got = average_precision(&labels, &scores).unwrap();
            prop_assert!((got - bruteforce_ap(&labels, &scores)).abs() <= 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transforms((labels, scores) in instance()) {
            let base = roc_auc(&labels, &scores).unwrap();
            let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s - 7.0).collect();
            let cube: Vec<f64> = scores.iter().map(|s| (s - 0.5).powi(3)).collect();
            prop_assert_eq!(roc_auc(&labels, &exp).unwrap(), base);
            prop_assert_eq!(roc_auc(&labels, &affine).unwrap(), base);
            prop_assert_eq!(roc_auc(&labels, &cube).unwrap(), base);
        }

        #[test]
        fn complement_symmetry_without_ties(labels in proptest::collection::vec(0u8..2, 2..60)) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let scores: Vec<f64> = (0..labels.len()).map(|i| ((i * 7919) % 1009) as f64).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = roc_auc(&labels, &scores).unwrap() + roc_auc(&labels, &neg).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
