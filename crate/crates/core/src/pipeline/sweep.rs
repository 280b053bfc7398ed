use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audit::{AuditRecord, LeakageAudit};
use super::generator::{fit_source, GeneratorChoice, SyntheticSource};
use super::{augment_training_set, fit_and_score, score, synthetic_count, Study, SweepConfig};
use crate::error::LossRecord;
use crate::evaluation::MetricReport;
use crate::predict::PredictorConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSeeds {
    pub generate: u64,
    pub sp_model: u64,
    pub full_model: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointOutcome {
    Completed {
        /// Subpopulation model on the subpopulation's test split.
        sp_model: MetricReport,
        /// Full-population model on the full test split.
        full_model: MetricReport,
        /// Full-population model on the subpopulation's test split.
        full_model_on_sp: MetricReport,
    },
    Failed {
        stage: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sp: String,
    pub fraction: f64,
    pub real_train_rows: usize,
    pub synthetic_rows: usize,
    pub seeds: PointSeeds,
    pub outcome: PointOutcome,
}

impl SweepPoint {
    pub fn sp_report(&self) -> Option<&MetricReport> {
        match &self.outcome {
            PointOutcome::Completed { sp_model, .. } => Some(sp_model),
            PointOutcome::Failed { .. } => None,
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.outcome, PointOutcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSummary {
    pub sp: String,
    pub seed: u64,
    pub description: Option<String>,
    pub training_rows: usize,
    pub loss_steps: usize,
    pub final_loss: Option<LossRecord>,
    pub error: Option<String>,
}

/// Every (subpopulation, fraction) outcome of a sweep, in target then
/// fraction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub fractions: Vec<f64>,
    pub targets: Vec<String>,
    pub generators: Vec<GeneratorSummary>,
    pub points: Vec<SweepPoint>,
    pub audit: LeakageAudit,
}

impl SweepResult {
    pub fn points_for<'a>(&'a self, sp: &'a str) -> impl Iterator<Item = &'a SweepPoint> + 'a {
        self.points.iter().filter(move |p| p.sp == sp)
    }

    pub fn point(&self, sp: &str, fraction: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.sp == sp && p.fraction == fraction)
    }

    pub fn failed(&self) -> usize {
        self.points.iter().filter(|p| p.is_failed()).count()
    }
}

/// A finished sweep plus what is not part of its reproducible record: the
/// fitted sources and wall-clock timings in seconds.
pub struct SweepRun {
    pub result: SweepResult,
    pub sources: BTreeMap<String, Box<dyn SyntheticSource>>,
    pub timings: BTreeMap<String, f64>,
}

struct PointRun {
    point: SweepPoint,
    audit: Vec<AuditRecord>,
    seconds: f64,
}

fn run_point(
    study: &Study,
    sp: &str,
    fraction: f64,
    source: Option<&dyn SyntheticSource>,
    cfg: &SweepConfig,
    pred: &PredictorConfig,
) -> PointRun {
    let started = Instant::now();
    let pair = study.split(sp).expect("targets are validated");
    let seeds = PointSeeds {
        generate: study.generate_seed(sp, fraction),
        sp_model: study.sp_model_seed(sp, fraction),
        full_model: study.full_model_seed(sp, fraction),
    };
    let synthetic_rows = synthetic_count(fraction, pair.train.real_rows());
    let mut audit = Vec::new();
    let label = format!("{sp}@{fraction}");
    let mut attempt = || -> std::result::Result<PointOutcome, (&'static str, Error)> {
        let augmented = match (synthetic_rows, source) {
            (0, _) => pair.train.clone(),
            (_, Some(src)) => {
                augment_training_set(&pair.train, src, fraction, seeds.generate).map_err(|e| ("generate", e))?
            }
            (_, None) => return Err(("generate", Error::Pipeline("no generator for this subpopulation".into()))),
        };
        let synthetic: Vec<usize> = (pair.train.n_rows()..augmented.n_rows()).collect();
        let full_train = study
            .full_train
            .concat(&augmented.select(&synthetic))
            .map_err(|e| ("full-train", e))?;

        let (sp_model, sp_report) = fit_and_score(&augmented, &pair.test, pred, seeds.sp_model, cfg.threshold)
            .map_err(|e| ("sp-model", e))?;
        audit.push(AuditRecord::model(format!("sp-model {label}"), &sp_model.provenance.row_ids, &pair.test));
        let (full_model, full_report) =
            fit_and_score(&full_train, &study.full_test, pred, seeds.full_model, cfg.threshold)
                .map_err(|e| ("full-model", e))?;
        audit.push(AuditRecord::model(
            format!("full-model {label}"),
            &full_model.provenance.row_ids,
            &study.full_test,
        ));
        let on_sp = score(&full_model, &pair.test, cfg.threshold).map_err(|e| ("full-model-on-sp", e))?;
        Ok(PointOutcome::Completed {
            sp_model: sp_report,
            full_model: full_report,
            full_model_on_sp: on_sp,
        })
    };
    let outcome = attempt().unwrap_or_else(|(stage, e)| {
        warn!("sweep point {label} failed during {stage}: {e}");
        PointOutcome::Failed {
            stage: stage.to_owned(),
            message: e.to_string(),
        }
    });
    PointRun {
        point: SweepPoint {
            sp: sp.to_owned(),
            fraction,
            real_train_rows: pair.train.real_rows(),
            synthetic_rows,
            seeds,
            outcome,
        },
        audit,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Fits one generator per target and evaluates every fraction of the grid.
/// Points run on a pool of `cfg.workers` threads; each draws only from
/// seeds derived from (subpopulation, fraction), so the schedule never
/// changes the result.
pub fn run_sweep(
    study: &Study,
    targets: &[String],
    cfg: &SweepConfig,
    generator: &GeneratorChoice,
    pred: &PredictorConfig,
) -> Result<SweepRun> {
    cfg.validate()?;
    pred.validate()?;
    if targets.is_empty() {
        return Err(Error::Pipeline("no target subpopulations to sweep".into()));
    }
    for sp in targets {
        study.split(sp)?;
    }
    let grid = cfg.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Pipeline(format!("cannot start worker pool: {e}")))?;

    let fitted: Vec<(String, u64, Result<Box<dyn SyntheticSource>>, f64)> = pool.install(|| {
        targets
            .par_iter()
            .map(|sp| {
                let started = Instant::now();
                let seed = study.generator_seed(sp);
                let train = &study.splits[sp].train;
                info!("fitting generator for `{sp}` on {} rows", train.n_rows());
                let source = fit_source(generator, sp, train, seed);
                (sp.clone(), seed, source, started.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut timings = BTreeMap::new();
    let mut audit = LeakageAudit::default();
    let mut generators = Vec::new();
    let mut sources: BTreeMap<String, Box<dyn SyntheticSource>> = BTreeMap::new();
    for (sp, seed, source, seconds) in fitted {
        timings.insert(format!("generator/{sp}"), seconds);
        let summary = match source {
            Ok(src) => {
                audit.push(AuditRecord::generator(
                    format!("generator {sp}"),
                    src.training_rows(),
                    &study.splits[&sp].train,
                    &study.full_test,
                ));
                let summary = GeneratorSummary {
                    sp: sp.clone(),
                    seed,
                    description: Some(src.describe()),
                    training_rows: src.training_rows().len(),
                    loss_steps: src.loss_trace().len(),
                    final_loss: src.loss_trace().last().copied(),
                    error: None,
                };
                sources.insert(sp, src);
                summary
            }
            Err(e) => {
                warn!("generator for `{sp}` failed: {e}");
                GeneratorSummary {
                    sp,
                    seed,
                    description: None,
                    training_rows: 0,
                    loss_steps: 0,
                    final_loss: None,
                    error: Some(e.to_string()),
                }
            }
        };
        generators.push(summary);
    }

    let tasks: Vec<(&String, f64)> = targets.iter().flat_map(|sp| grid.iter().map(move |&f| (sp, f))).collect();
    let runs: Vec<PointRun> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(sp, f)| run_point(study, sp, *f, sources.get(*sp).map(|b| b.as_ref()), cfg, pred))
            .collect()
    });
    let mut points = Vec::with_capacity(runs.len());
    for run in runs {
        timings.insert(format!("point/{}/{}", run.point.sp, run.point.fraction), run.seconds);
        for record in run.audit {
            audit.push(record);
        }
        points.push(run.point);
    }

    let result = SweepResult {
        fractions: grid,
        targets: targets.to_vec(),
        generators,
        points,
        audit,
    };
    let failed = result.failed();
    let total = result.points.len();
    if 2 * failed > total {
        return Err(Error::SweepFailed {
            failed,
            total,
            partial: Box::new(result),
        });
    }
    Ok(SweepRun { result, sources, timings })
}

/// The fraction with the highest subpopulation-model ROC AUC; ties go to
/// the smallest fraction.
pub fn select_best_fraction(sweep: &SweepResult, sp: &str) -> Result<(f64, MetricReport)> {
    let mut best: Option<(f64, MetricReport)> = None;
    let mut points: Vec<&SweepPoint> = sweep.points_for(sp).collect();
    points.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
    for p in points {
        if let Some(r) = p.sp_report() {
            if best.as_ref().is_none_or(|(_, b)| r.roc_auc > b.roc_auc) {
                best = Some((p.fraction, *r));
            }
        }
    }
    best.ok_or_else(|| Error::Pipeline(format!("no successful sweep point for `{sp}`")))
}
