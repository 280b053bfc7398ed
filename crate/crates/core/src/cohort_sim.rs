//! Simulated EHR-like cohorts with known subpopulation structure.
//!
//! Continuous features are Gaussian per subpopulation, categorical features
//! multinomial per subpopulation, and the outcome follows a logistic concept
//! over the latent continuous features, so the Bayes-optimal score is known.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli, Distribution};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, ColumnSpec, Dataset, Provenance, RowId, Schema, SplitTag};
use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::seed::{self, Rng};

/// Minimum Monte Carlo sample size accepted by [`bayes_auc`].
pub const MIN_BAYES_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Concept {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let z = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpopSpec {
    pub pm_value: String,
    pub size: usize,
    pub feature_means: Vec<f64>,
    pub feature_spreads: Vec<f64>,
    /// One probability vector per categorical column; empty means uniform.
    #[serde(default)]
    pub categorical_probabilities: Vec<Vec<f64>>,
    /// Per-subpopulation concept, simulating concept shift.
    #[serde(default)]
    pub concept_override: Option<Concept>,
}

impl SubpopSpec {
    pub fn new(pm_value: impl Into<String>, size: usize, means: Vec<f64>, spreads: Vec<f64>) -> Self {
        Self {
            pm_value: pm_value.into(),
            size,
            feature_means: means,
            feature_spreads: spreads,
            categorical_probabilities: Vec::new(),
            concept_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default = "default_marker")]
    pub marker_column: String,
    pub n_continuous: usize,
    pub subpops: Vec<SubpopSpec>,
    #[serde(default)]
    pub categorical: Vec<CategoricalSpec>,
    pub concept: Concept,
    /// Std. dev. of Gaussian measurement noise added to the observed
    /// continuous features; the outcome depends on the noiseless values.
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_label() -> String {
    "outcome".into()
}

fn default_marker() -> String {
    "ethnicity".into()
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.subpops.is_empty() {
            return bad("simulator config has no subpopulations".into());
        }
        if self.concept.weights.len() != self.n_continuous {
            return bad(format!(
                "concept has {} weights for {} continuous features",
                self.concept.weights.len(),
                self.n_continuous
            ));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale {} must be finite and >= 0", self.noise_scale));
        }
        if self.categorical.iter().any(|c| c.levels == 0) {
            return bad("categorical column with zero levels".into());
        }
        let mut seen = BTreeSet::new();
        for sp in &self.subpops {
            let name = &sp.pm_value;
            if !seen.insert(name.as_str()) {
                return bad(format!("duplicate subpopulation `{name}`"));
            }
            if sp.size == 0 {
                return bad(format!("subpopulation `{name}` has size 0"));
            }
            if sp.feature_means.len() != self.n_continuous || sp.feature_spreads.len() != self.n_continuous {
                return bad(format!("subpopulation `{name}` feature vectors have the wrong length"));
            }
            if sp.feature_spreads.iter().any(|s| !(*s > 0.0)) {
                return bad(format!("subpopulation `{name}` has a non-positive spread"));
            }
            if let Some(c) = &sp.concept_override {
                if c.weights.len() != self.n_continuous {
                    return bad(format!("subpopulation `{name}` concept override has the wrong length"));
                }
            }
            if !sp.categorical_probabilities.is_empty() {
                if sp.categorical_probabilities.len() != self.categorical.len() {
                    return bad(format!("subpopulation `{name}` categorical probabilities mismatch"));
                }
                for (p, spec) in sp.categorical_probabilities.iter().zip(&self.categorical) {
                    let sum: f64 = p.iter().sum();
                    if p.len() != spec.levels || p.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                        return bad(format!(
                            "subpopulation `{name}` categorical probabilities must be {} non-negative values summing to 1",
                            spec.levels
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let mut cols: Vec<ColumnSpec> = (0..self.n_continuous)
            .map(|j| ColumnSpec::continuous(format!("x{j}")))
            .collect();
        cols.extend((0..self.categorical.len()).map(|j| ColumnSpec::categorical(format!("cat{j}"))));
        cols.push(ColumnSpec::label(&self.label_column));
        cols.push(ColumnSpec::population_marker(&self.marker_column));
        Schema::new(cols).expect("simulator schema is valid by construction")
    }

    fn subpop_index(&self, pm_value: &str) -> Result<usize> {
        self.subpops
            .iter()
            .position(|s| s.pm_value == pm_value)
            .ok_or_else(|| Error::Config(format!("unknown subpopulation `{pm_value}`")))
    }

    pub fn concept_for<'a>(&'a self, sp: &'a SubpopSpec) -> &'a Concept {
        sp.concept_override.as_ref().unwrap_or(&self.concept)
    }
}

pub fn level_name(k: usize) -> String {
    format!("L{k}")
}

/// Sorted level table plus a map from configured level index to code.
fn coded_levels(names: Vec<String>) -> (Vec<String>, Vec<u32>) {
    let mut sorted = names.clone();
    sorted.sort();
    let map = names
        .iter()
        .map(|n| sorted.binary_search(n).unwrap() as u32)
        .collect();
    (sorted, map)
}

/// Column-wise accumulator for simulated rows.
struct Builder {
    continuous: Vec<Vec<Option<f64>>>,
    categorical: Vec<Vec<Option<u32>>>,
    labels: Vec<Option<u32>>,
    markers: Vec<Option<u32>>,
    latent_scores: Vec<f64>,
}

impl Builder {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            continuous: vec![Vec::new(); cfg.n_continuous],
            categorical: vec![Vec::new(); cfg.categorical.len()],
            labels: Vec::new(),
            markers: Vec::new(),
            latent_scores: Vec::new(),
        }
    }

    fn sample(&mut self, cfg: &SimConfig, sp_index: usize, n: usize, rng: &mut Rng) {
        let sp = &cfg.subpops[sp_index];
        let concept = cfg.concept_for(sp);
        let (_, level_maps): (Vec<_>, Vec<_>) = cfg
            .categorical
            .iter()
            .map(|c| coded_levels((0..c.levels).map(level_name).collect()))
            .unzip();
        let pm_code = coded_levels(cfg.subpops.iter().map(|s| s.pm_value.clone()).collect()).1[sp_index];
        let pickers: Vec<WeightedIndex<f64>> = cfg
            .categorical
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let w = sp
                    .categorical_probabilities
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| vec![1.0; c.levels]);
                WeightedIndex::new(w).expect("validated probabilities")
            })
            .collect();
        let mut latent = vec![0.0; cfg.n_continuous];
        for _ in 0..n {
            for j in 0..cfg.n_continuous {
                let z: f64 = StandardNormal.sample(rng);
                latent[j] = sp.feature_means[j] + sp.feature_spreads[j] * z;
            }
            for j in 0..cfg.n_continuous {
                let observed = if cfg.noise_scale > 0.0 {
                    let e: f64 = StandardNormal.sample(rng);
                    latent[j] + cfg.noise_scale * e
                } else {
                    latent[j]
                };
                self.continuous[j].push(Some(observed));
            }
            for (j, picker) in pickers.iter().enumerate() {
                let k = picker.sample(rng);
                self.categorical[j].push(Some(level_maps[j][k]));
            }
            let p = concept.probability(&latent);
            let y = Bernoulli::new(p).expect("probability in [0,1]").sample(rng);
            self.labels.push(Some(u32::from(y)));
            self.markers.push(Some(pm_code));
            self.latent_scores.push(p);
        }
    }

    fn finish(self, cfg: &SimConfig, row_ids: Vec<RowId>, provenance: Provenance) -> Dataset {
        let mut columns: Vec<ColumnData> = self.continuous.into_iter().map(ColumnData::Continuous).collect();
        for (codes, spec) in self.categorical.into_iter().zip(&cfg.categorical) {
            let levels = coded_levels((0..spec.levels).map(level_name).collect()).0;
            columns.push(ColumnData::Categorical { levels, codes });
        }
        columns.push(ColumnData::Categorical {
            levels: vec!["0".into(), "1".into()],
            codes: self.labels,
        });
        let pm_levels = coded_levels(cfg.subpops.iter().map(|s| s.pm_value.clone()).collect()).0;
        columns.push(ColumnData::Categorical {
            levels: pm_levels,
            codes: self.markers,
        });
        Dataset::new(cfg.schema(), columns, row_ids, provenance).expect("simulated columns match schema")
    }
}

/// Simulates the full cohort: subpopulations in configuration order, sizes exact.
pub fn simulate_cohort(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let mut b = Builder::new(cfg);
    for i in 0..cfg.subpops.len() {
        b.sample(cfg, i, cfg.subpops[i].size, &mut rng);
    }
    let n = b.labels.len() as u64;
    Ok(b.finish(
        cfg,
        (0..n).map(RowId::Real).collect(),
        Provenance::new(format!("simulated(seed={})", cfg.seed), SplitTag::Whole),
    ))
}

/// Fresh rows from one subpopulation's true distribution, tagged synthetic.
pub fn oracle_sample(cfg: &SimConfig, pm_value: &str, n: usize, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let i = cfg.subpop_index(pm_value)?;
    let mut rng = seed::rng(seed);
    let mut b = Builder::new(cfg);
    b.sample(cfg, i, n, &mut rng);
    Ok(b.finish(
        cfg,
        (0..n as u64)
            .map(|index| RowId::Synthetic { batch: seed, index })
            .collect(),
        Provenance::new(format!("oracle({pm_value}, seed={seed})"), SplitTag::Synthetic),
    ))
}

/// ROC AUC of the true conditional probability against sampled outcomes.
pub fn bayes_auc(cfg: &SimConfig, pm_value: &str, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc < MIN_BAYES_SAMPLES {
        return Err(Error::Config(format!(
            "bayes_auc needs at least {MIN_BAYES_SAMPLES} samples, got {n_mc}"
        )));
    }
    cfg.validate()?;
    let i = cfg.subpop_index(pm_value)?;
    let mut rng = seed::rng(seed);
    let mut b = Builder::new(cfg);
    b.sample(cfg, i, n_mc, &mut rng);
    let labels: Vec<u8> = b.labels.iter().map(|c| c.unwrap() as u8).collect();
    roc_auc(&labels, &b.latent_scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SimConfig {
        SimConfig {
            label_column: "outcome".into(),
            marker_column: "ethnicity".into(),
            n_continuous: 2,
            subpops: vec![
                SubpopSpec::new("White", 1000, vec![0.0, 0.0], vec![1.0, 1.0]),
                SubpopSpec {
                    categorical_probabilities: vec![vec![0.2, 0.5, 0.3]],
                    ..SubpopSpec::new("Asian", 50, vec![1.0, -1.0], vec![0.5, 2.0])
                },
            ],
            categorical: vec![CategoricalSpec { levels: 3 }],
            concept: Concept {
                weights: vec![1.0, -0.5],
                bias: 0.0,
            },
            noise_scale: 0.0,
            seed: 11,
        }
    }

    #[test]
    fn sizes_are_exact() {
        let d = simulate_cohort(&config()).unwrap();
        assert_eq!(d.n_rows(), 1050);
        let counts = d.category_counts(d.schema().marker_index()).unwrap();
        assert_eq!(counts["White"], 1000);
        assert_eq!(counts["Asian"], 50);
        assert!(!d.has_missing());
    }

    #[test]
    fn seeded_determinism() {
        let a = simulate_cohort(&config()).unwrap();
        assert_eq!(a, simulate_cohort(&config()).unwrap());
        let mut other = config();
        other.seed = 12;
        assert_ne!(a.columns(), simulate_cohort(&other).unwrap().columns());
    }

    #[test]
    fn uninformative_concept_prevalence() {
        // binomial check: |prevalence - 0.5| within 3 standard errors, every seed
        let mut cfg = config();
        cfg.concept = Concept {
            weights: vec![0.0, 0.0],
            bias: 0.0,
        };
        for s in 0..10 {
            cfg.seed = s;
            let d = simulate_cohort(&cfg).unwrap();
            let y = d.binary_labels().unwrap();
            let prev = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
            let se = (0.25 / y.len() as f64).sqrt();
            assert!((prev - 0.5).abs() < 3.0 * se, "seed {s}: prevalence {prev}");
        }
    }

    #[test]
    fn oracle_sample_edge_cases() {
        let cfg = config();
        let d = oracle_sample(&cfg, "Asian", 0, 1).unwrap();
        assert_eq!(d.n_rows(), 0);
        assert_eq!(d.schema(), &cfg.schema());
        assert!(matches!(oracle_sample(&cfg, "Martian", 5, 1), Err(Error::Config(_))));
        let d = oracle_sample(&cfg, "Asian", 5, 1).unwrap();
        assert!(d.row_ids().iter().all(|r| !r.is_real()));
        assert_eq!(d.provenance.split, SplitTag::Synthetic);
    }

    #[test]
    fn oracle_sample_moments() {
        let cfg = config();
        let d = oracle_sample(&cfg, "Asian", 10_000, 5).unwrap();
        for (j, (&mu, &sd)) in [1.0, -1.0].iter().zip(&[0.5, 2.0]).enumerate() {
            let v: Vec<f64> = d.values(j).unwrap().iter().map(|x| x.unwrap()).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            assert!((mean - mu).abs() < 4.0 * sd / 100.0, "feature {j}: mean {mean}");
        }
        let counts = d.category_counts(2).unwrap();
        let target = [0.2, 0.5, 0.3];
        let tv: f64 = (0..3)
            .map(|k| (counts.get(&level_name(k)).copied().unwrap_or(0) as f64 / 10_000.0 - target[k]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn oracle_and_cohort_share_distribution() {
        // two-sample check on the mean of x0 for the majority subpopulation
        let cfg = config();
        let cohort = simulate_cohort(&cfg).unwrap();
        let sample = oracle_sample(&cfg, "White", 1000, 99).unwrap();
        let mean = |d: &Dataset, rows: std::ops::Range<usize>| {
            let v = d.values(0).unwrap();
            rows.clone().map(|r| v[r].unwrap()).sum::<f64>() / rows.len() as f64
        };
        let diff = mean(&cohort, 0..1000) - mean(&sample, 0..1000);
        assert!(diff.abs() < 4.0 * (2.0f64 / 1000.0).sqrt(), "diff {diff}");
    }

    #[test]
    fn bayes_auc_bounds() {
        let mut cfg = config();
        cfg.concept.weights = vec![0.0, 0.0];
        let a = bayes_auc(&cfg, "White", 100_000, 3).unwrap();
        assert!((a - 0.5).abs() < 0.02, "uninformative: {a}");

        cfg.concept.weights = vec![200.0, 0.0];
        let a = bayes_auc(&cfg, "White", 10_000, 3).unwrap();
        assert!(a > 0.99, "separable: {a}");

        let cfg = config();
        let a = bayes_auc(&cfg, "Asian", 100_000, 1).unwrap();
        let b = bayes_auc(&cfg, "Asian", 100_000, 2).unwrap();
        assert!((a - b).abs() < 0.01);
        assert!(bayes_auc(&cfg, "Asian", 9_999, 1).is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut c = config();
        c.subpops.clear();
        assert!(simulate_cohort(&c).is_err());
        let mut c = config();
        c.subpops[0].feature_spreads[0] = 0.0;
        assert!(c.validate().is_err());
        let mut c = config();
        c.subpops[1].categorical_probabilities = vec![vec![0.5, 0.6, 0.0]];
        assert!(c.validate().is_err());
        let mut c = config();
        c.subpops[1].size = 0;
        assert!(c.validate().is_err());
    }
}
