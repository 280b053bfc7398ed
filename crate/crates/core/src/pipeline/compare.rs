use log::warn;
use serde::{Deserialize, Serialize};

use super::audit::{AuditRecord, LeakageAudit};
use super::sweep::{select_best_fraction, SweepResult};
use super::{fit_and_score, Study, SweepConfig};
use crate::data::{stratified_split, Dataset};
use crate::evaluation::MetricReport;
use crate::predict::PredictorConfig;
use crate::resample::{random_undersample, smote_oversample, RusStrategy, DEFAULT_K_NEIGHBORS};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// One subpopulation's ROC AUC under each protocol. `None` marks a protocol
/// that could not be evaluated; the reason is in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sp: String,
    /// Size of the subpopulation's test split.
    pub n: usize,
    pub smote: Option<f64>,
    pub rus: Option<f64>,
    pub ens: Option<f64>,
    pub ens_gan: Option<f64>,
    pub selected_fraction: Option<f64>,
    pub swept: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub use_case: String,
    /// Rows ordered by subpopulation size, largest first.
    pub rows: Vec<ComparisonRow>,
    pub audit: LeakageAudit,
}

fn rows_with_marker(d: &Dataset, sp: &str) -> Dataset {
    let rows: Vec<usize> = (0..d.n_rows()).filter(|&r| d.marker_value(r) == Some(sp)).collect();
    d.select(&rows)
}

/// Studied rows only: excluded markers take no part in the resampling baselines.
fn studied_rows(study: &Study) -> Dataset {
    let rows: Vec<usize> = (0..study.data.n_rows())
        .filter(|&r| study.data.marker_value(r).is_some_and(|m| study.splits.contains_key(m)))
        .collect();
    study.data.select(&rows)
}

fn scored(
    protocol: &str,
    sp: &str,
    train: &Dataset,
    test: &Dataset,
    pred: &PredictorConfig,
    seed: u64,
    threshold: f64,
    audit: &mut LeakageAudit,
    notes: &mut Vec<String>,
) -> Option<MetricReport> {
    match fit_and_score(train, test, pred, seed, threshold) {
        Ok((model, report)) => {
            audit.push(AuditRecord::model(format!("{protocol} {sp}"), &model.provenance.row_ids, test));
            Some(report)
        }
        Err(e) => {
            warn!("{protocol} baseline for `{sp}` failed: {e}");
            notes.push(format!("{protocol}: {e}"));
            None
        }
    }
}

/// Evaluates every studied subpopulation under the SMOTE, RUS and vanilla
/// ensemble protocols and, for swept targets, the best augmentation point.
pub fn run_baseline_comparison(
    study: &Study,
    use_case: &str,
    cfg: &SweepConfig,
    pred: &PredictorConfig,
    sweep: Option<&SweepResult>,
) -> Result<ComparisonTable> {
    let master = study.master_seed;
    let marker = study.data.schema().marker_name().to_owned();
    let data = studied_rows(study);
    let mut audit = LeakageAudit::default();

    // SMOTE: one split stratified by marker, oversample every marker class in train.
    let smote = stratified_split(&data, cfg.train_fraction, &marker, derive_seed(master, &["smote-split"]))
        .and_then(|split| {
            let (train, _) = smote_oversample(&split.train, &marker, DEFAULT_K_NEIGHBORS, derive_seed(master, &["smote"]))?;
            Ok((train, split.test))
        });
    if let Err(e) = &smote {
        warn!("SMOTE baseline unavailable: {e}");
    }
    // RUS: undersample the whole data by marker, split each subpopulation afterwards.
    let rus = random_undersample(&data, &marker, RusStrategy::All, derive_seed(master, &["rus"])).map(|(d, _)| d);
    if let Err(e) = &rus {
        warn!("RUS baseline unavailable: {e}");
    }

    let mut rows = Vec::new();
    for sp in study.by_size() {
        let pair = study.split(&sp)?;
        let mut notes = Vec::new();
        let smote_score = match &smote {
            Ok((train, test)) => scored(
                "smote",
                &sp,
                &rows_with_marker(train, &sp),
                &rows_with_marker(test, &sp),
                pred,
                derive_seed(master, &["smote-model", &sp]),
                cfg.threshold,
                &mut audit,
                &mut notes,
            ),
            Err(e) => {
                notes.push(format!("smote: {e}"));
                None
            }
        };
        let rus_score = match &rus {
            Ok(d) => {
                let label = d.schema().label_name().to_owned();
                match stratified_split(
                    &rows_with_marker(d, &sp),
                    cfg.train_fraction,
                    &label,
                    derive_seed(master, &["rus-split", &sp]),
                ) {
                    Ok(split) => scored(
                        "rus",
                        &sp,
                        &split.train,
                        &split.test,
                        pred,
                        derive_seed(master, &["rus-model", &sp]),
                        cfg.threshold,
                        &mut audit,
                        &mut notes,
                    ),
                    Err(e) => {
                        notes.push(format!("rus: {e}"));
                        None
                    }
                }
            }
            Err(e) => {
                notes.push(format!("rus: {e}"));
                None
            }
        };
        let ens = scored(
            "ens",
            &sp,
            &pair.train,
            &pair.test,
            pred,
            study.sp_model_seed(&sp, 0.0),
            cfg.threshold,
            &mut audit,
            &mut notes,
        );

        let swept = sweep.is_some_and(|s| s.targets.contains(&sp));
        let (ens_gan, selected_fraction) = match sweep {
            Some(s) if swept => match select_best_fraction(s, &sp) {
                Ok((f, report)) => (Some(report.roc_auc), Some(f)),
                Err(e) => {
                    notes.push(format!("ens_gan: {e}"));
                    (None, None)
                }
            },
            _ => (ens.map(|r| r.roc_auc), ens.map(|_| 0.0)),
        };
        rows.push(ComparisonRow {
            sp,
            n: pair.test.n_rows(),
            smote: smote_score.map(|r| r.roc_auc),
            rus: rus_score.map(|r| r.roc_auc),
            ens: ens.map(|r| r.roc_auc),
            ens_gan,
            selected_fraction,
            swept,
            notes,
        });
    }
    if rows.is_empty() {
        return Err(Error::Pipeline("no subpopulations to compare".into()));
    }
    Ok(ComparisonTable {
        use_case: use_case.to_owned(),
        rows,
        audit,
    })
}
