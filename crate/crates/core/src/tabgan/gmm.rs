//! One-dimensional Gaussian mixtures fitted by EM, used for mode-specific
//! normalisation of continuous columns.

use serde::{Deserialize, Serialize};

/// Components whose weight falls below this are dropped after fitting.
pub const MIN_MODE_WEIGHT: f64 = 0.005;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

fn log_normal(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

impl Mixture {
    pub fn n_modes(&self) -> usize {
        self.means.len()
    }

    /// Fits at most `max_modes` components (fewer when there are fewer
    /// distinct values). Quantile initialisation keeps the fit deterministic.
    pub fn fit(values: &[f64], max_modes: usize) -> Self {
        assert!(!values.is_empty(), "mixture fit needs data");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        let k = max_modes.clamp(1, distinct.len());
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let floor = (sd * 1e-3).max(1e-6);
        if k == 1 {
            return Self {
                weights: vec![1.0],
                means: vec![mean],
                stds: vec![sd.max(floor)],
            };
        }

        let mut means: Vec<f64> = (0..k)
            .map(|i| sorted[((i as f64 + 0.5) / k as f64 * n) as usize])
            .collect();
        let mut stds = vec![(sd / k as f64).max(floor); k];
        let mut weights = vec![1.0 / k as f64; k];
        let mut resp = vec![0.0; values.len() * k];
        let mut prev_ll = f64::NEG_INFINITY;
        for _ in 0..MAX_ITER {
            let mut ll = 0.0;
            for (i, &x) in values.iter().enumerate() {
                let row = &mut resp[i * k..(i + 1) * k];
                let mut m = f64::NEG_INFINITY;
                for c in 0..k {
                    row[c] = weights[c].max(1e-300).ln() + log_normal(x, means[c], stds[c]);
                    m = m.max(row[c]);
                }
                let mut s = 0.0;
                for r in row.iter_mut() {
                    *r = (*r - m).exp();
                    s += *r;
                }
                for r in row.iter_mut() {
                    *r /= s;
                }
                ll += m + s.ln();
            }
            for c in 0..k {
                let nk: f64 = (0..values.len()).map(|i| resp[i * k + c]).sum();
                if nk < 1e-10 {
                    weights[c] = 0.0;
                    continue;
                }
                let mu = (0..values.len()).map(|i| resp[i * k + c] * values[i]).sum::<f64>() / nk;
                let var = (0..values.len())
                    .map(|i| resp[i * k + c] * (values[i] - mu).powi(2))
                    .sum::<f64>()
                    / nk;
                weights[c] = nk / n;
                means[c] = mu;
                stds[c] = var.sqrt().max(floor);
            }
            if (ll - prev_ll).abs() <= TOL * ll.abs().max(1.0) {
                break;
            }
            prev_ll = ll;
        }

        let keep: Vec<usize> = (0..k).filter(|&c| weights[c] >= MIN_MODE_WEIGHT).collect();
        let total: f64 = keep.iter().map(|&c| weights[c]).sum();
        Self {
            weights: keep.iter().map(|&c| weights[c] / total).collect(),
            means: keep.iter().map(|&c| means[c]).collect(),
            stds: keep.iter().map(|&c| stds[c]).collect(),
        }
    }

    /// Posterior mode probabilities for `x`.
    pub fn posterior(&self, x: f64) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.n_modes())
            .map(|c| self.weights[c].ln() + log_normal(x, self.means[c], self.stds[c]))
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }
}
