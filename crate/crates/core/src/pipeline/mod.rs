//! End-to-end orchestration: split every subpopulation, find the ones the
//! baseline serves worst, fit a generator per target, sweep augmentation
//! fractions and compare against resampling baselines.

mod audit;
mod compare;
mod generator;
mod manifest;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{
    partition_by_pm, stratified_split, Dataset, Provenance, SplitPair, SplitTag, SubpopulationPartition,
    DEFAULT_TRAIN_FRACTION,
};
use crate::evaluation::{metric_suite, MetricReport, DEFAULT_THRESHOLD};
use crate::predict::{predict_scores, train_classifier, PredictorConfig, TrainedModel};
use crate::seed::{derive_seed, fraction_label};
use crate::{Error, Result};

pub use audit::{AuditKind, AuditRecord, LeakageAudit};
pub use compare::{run_baseline_comparison, ComparisonRow, ComparisonTable};
pub use generator::{fit_source, GeneratorChoice, OracleGenerator, SyntheticSource};
pub use manifest::{dataset_hash, PointStatus, RunManifest};
pub use sweep::{
    run_sweep, select_best_fraction, GeneratorSummary, PointOutcome, PointSeeds, SweepPoint, SweepResult, SweepRun,
};

pub const DEFAULT_FRACTIONS: [f64; 20] = [
    0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.60, 0.70, 0.80, 0.90, 1.0, 1.5, 2.0, 5.0,
    10.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Synthetic rows as a multiple of the subpopulation's real training size.
    pub fractions: Vec<f64>,
    pub master_seed: u64,
    /// Marker values kept in the full population but never studied as subpopulations.
    pub excluded_pms: BTreeSet<String>,
    pub underperformance_margin: f64,
    pub train_fraction: f64,
    pub threshold: f64,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            master_seed: 0,
            excluded_pms: BTreeSet::new(),
            underperformance_margin: 0.0,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            threshold: DEFAULT_THRESHOLD,
            workers: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.fractions.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
            return Err(Error::Config(format!("augmentation fraction {f} must be finite and >= 0")));
        }
        if !(self.underperformance_margin >= 0.0) {
            return Err(Error::Config("underperformance margin must be >= 0".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction {} is outside (0, 1)", self.train_fraction)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// The configured grid, sorted and deduplicated at basis-point resolution,
    /// with 0 always present.
    pub fn grid(&self) -> Vec<f64> {
        let mut bp: BTreeSet<i64> = self.fractions.iter().map(|f| (f * 10_000.0).round() as i64).collect();
        bp.insert(0);
        bp.into_iter().map(|b| b as f64 / 10_000.0).collect()
    }
}

/// Synthetic row count for a fraction of `real_rows`, rounding half up.
pub fn synthetic_count(fraction: f64, real_rows: usize) -> usize {
    let bp = (fraction * 10_000.0).round() as u128;
    ((bp * real_rows as u128 + 5_000) / 10_000) as usize
}

/// The preprocessed data with its partition and every train/test split,
/// fixed for a whole run.
#[derive(Debug, Clone)]
pub struct Study {
    pub data: Dataset,
    pub partition: SubpopulationPartition,
    /// Per-subpopulation splits, each stratified by outcome.
    pub splits: BTreeMap<String, SplitPair>,
    /// Split of the rows whose marker is excluded, when there are any.
    pub excluded_split: Option<SplitPair>,
    pub full_train: Dataset,
    pub full_test: Dataset,
    pub master_seed: u64,
}

pub const EXCLUDED_KEY: &str = "<excluded>";

impl Study {
    /// Splits each subpopulation independently; the full-population sets are
    /// the unions of those splits.
    pub fn new(d: &Dataset, cfg: &SweepConfig) -> Result<Study> {
        cfg.validate()?;
        if d.has_missing() {
            return Err(Error::Data("dataset has missing cells; preprocess first".into()));
        }
        let partition = partition_by_pm(d, &cfg.excluded_pms)?;
        if partition.subsets.is_empty() {
            return Err(Error::Data("no subpopulations left after exclusions".into()));
        }
        let label = d.schema().label_name().to_owned();
        let mut splits = BTreeMap::new();
        for (sp, subset) in &partition.subsets {
            let seed = derive_seed(cfg.master_seed, &["split", sp]);
            splits.insert(sp.clone(), stratified_split(subset, cfg.train_fraction, &label, seed)?);
        }
        let excluded_split = if partition.excluded_rows.is_empty() {
            None
        } else {
            let seed = derive_seed(cfg.master_seed, &["split", EXCLUDED_KEY]);
            Some(stratified_split(&partition.excluded_rows, cfg.train_fraction, &label, seed)?)
        };
        let union = |pick: fn(&SplitPair) -> &Dataset, split: SplitTag| -> Result<Dataset> {
            let mut out = Dataset::empty_like(d, Provenance::new(format!("{}[full]", d.provenance.source), split));
            for pair in splits.values().chain(excluded_split.as_ref()) {
                out = out.concat(pick(pair))?;
            }
            Ok(out)
        };
        let full_train = union(|p| &p.train, SplitTag::Train)?;
        let full_test = union(|p| &p.test, SplitTag::Test)?;
        Ok(Study {
            data: d.clone(),
            partition,
            splits,
            excluded_split,
            full_train,
            full_test,
            master_seed: cfg.master_seed,
        })
    }

    pub fn split(&self, sp: &str) -> Result<&SplitPair> {
        self.splits
            .get(sp)
            .ok_or_else(|| Error::Pipeline(format!("`{sp}` is not a studied subpopulation")))
    }

    /// Subpopulation names, largest first (ties by name).
    pub fn by_size(&self) -> Vec<String> {
        let mut names: Vec<(usize, &String)> =
            self.partition.subsets.iter().map(|(k, v)| (v.n_rows(), k)).collect();
        names.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        names.into_iter().map(|(_, k)| k.clone()).collect()
    }

    pub fn sp_model_seed(&self, sp: &str, fraction: f64) -> u64 {
        derive_seed(self.master_seed, &["sp-model", sp, &fraction_label(fraction)])
    }

    pub fn full_model_seed(&self, sp: &str, fraction: f64) -> u64 {
        derive_seed(self.master_seed, &["full-model", sp, &fraction_label(fraction)])
    }

    pub fn generator_seed(&self, sp: &str) -> u64 {
        derive_seed(self.master_seed, &["generator", sp])
    }

    pub fn generate_seed(&self, sp: &str, fraction: f64) -> u64 {
        derive_seed(self.master_seed, &["generate", sp, &fraction_label(fraction)])
    }
}

/// Trains on `train` with a derived seed and scores `test`.
pub(crate) fn fit_and_score(
    train: &Dataset,
    test: &Dataset,
    pred: &PredictorConfig,
    seed: u64,
    threshold: f64,
) -> Result<(TrainedModel<f64>, MetricReport)> {
    let cfg = PredictorConfig { seed, ..*pred };
    let model = train_classifier::<f64>(train, &cfg)?;
    let report = score(&model, test, threshold)?;
    Ok((model, report))
}

pub(crate) fn score(model: &TrainedModel<f64>, test: &Dataset, threshold: f64) -> Result<MetricReport> {
    let scores = predict_scores(model, test)?;
    metric_suite(&test.binary_labels()?, &scores, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Assessment {
    Assessed { baseline: MetricReport, underperforming: bool },
    Unassessable { reason: String },
}

/// Baseline comparison of every subpopulation against the full population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub full_population: MetricReport,
    pub margin: f64,
    pub subpopulations: BTreeMap<String, Assessment>,
    #[serde(default)]
    pub audit: LeakageAudit,
}

impl Identification {
    /// Flagged subpopulations in name order.
    pub fn underperforming(&self) -> Vec<String> {
        self.subpopulations
            .iter()
            .filter(|(_, a)| matches!(a, Assessment::Assessed { underperforming: true, .. }))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn baseline(&self, sp: &str) -> Option<&MetricReport> {
        match self.subpopulations.get(sp)? {
            Assessment::Assessed { baseline, .. } => Some(baseline),
            Assessment::Unassessable { .. } => None,
        }
    }
}

/// Flags subpopulations whose real-rows-only model scores a test ROC AUC
/// strictly below the full-population model's, minus the margin.
pub fn identify_underperforming(study: &Study, cfg: &SweepConfig, pred: &PredictorConfig) -> Result<Identification> {
    let full_seed = derive_seed(study.master_seed, &["full-model", "baseline"]);
    let (full_model, full) = fit_and_score(&study.full_train, &study.full_test, pred, full_seed, cfg.threshold)?;
    let mut audit = LeakageAudit::default();
    audit.push(AuditRecord::model("full-model baseline", &full_model.provenance.row_ids, &study.full_test));
    let mut subpopulations = BTreeMap::new();
    for (sp, pair) in &study.splits {
        let assessment = match fit_and_score(&pair.train, &pair.test, pred, study.sp_model_seed(sp, 0.0), cfg.threshold) {
            Ok((model, baseline)) => {
                audit.push(AuditRecord::model(format!("baseline {sp}"), &model.provenance.row_ids, &pair.test));
                Assessment::Assessed {
                    underperforming: baseline.roc_auc < full.roc_auc - cfg.underperformance_margin,
                    baseline,
                }
            }
            Err(e @ (Error::MetricUndefined(_) | Error::Training(_))) => {
                warn!("subpopulation `{sp}` is unassessable and excluded: {e}");
                Assessment::Unassessable { reason: e.to_string() }
            }
            Err(e) => return Err(e),
        };
        subpopulations.insert(sp.clone(), assessment);
    }
    Ok(Identification {
        full_population: full,
        margin: cfg.underperformance_margin,
        subpopulations,
        audit,
    })
}

/// The real training rows plus `round(fraction * n)` generated rows.
pub fn augment_training_set(train: &Dataset, source: &dyn SyntheticSource, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(Error::Config(format!("augmentation fraction {fraction} must be finite and >= 0")));
    }
    if source.schema_fingerprint() != train.schema().fingerprint() {
        return Err(Error::Schema("generator schema does not match the training set".into()));
    }
    let n = synthetic_count(fraction, train.real_rows());
    let out = if n == 0 {
        train.clone()
    } else {
        train.concat(&source.generate(n, seed)?)?
    };
    let source_name = if n == 0 {
        train.provenance.source.clone()
    } else {
        format!("{}+synthetic({n})", train.provenance.source)
    };
    Ok(out.with_provenance(Provenance::new(source_name, SplitTag::Train)))
}
