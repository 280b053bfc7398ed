//! Prediction models: gradient-boosted trees (default) and logistic
//! regression behind one interface, with schema-checked scoring.

mod gbdt;
mod logistic;

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use gbdt::{BoostingParams, GradientBoostedTrees, Node, Tree};
pub use logistic::LogisticRegression;

use crate::data::{ColumnData, Dataset, RowId};
use crate::error::{Error, Result};
use crate::{artifact, Scalar};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    #[default]
    GradientBoosting,
    Logistic,
}

/// Fixed across every subpopulation and sweep point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: PredictorKind::GradientBoosting,
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kind == PredictorKind::GradientBoosting
            && (self.n_trees == 0 || self.max_depth == 0 || !(self.learning_rate > 0.0))
        {
            return Err(Error::Config(
                "gradient boosting needs n_trees >= 1, max_depth >= 1 and learning_rate > 0".into(),
            ));
        }
        Ok(())
    }

    fn boosting(&self) -> BoostingParams {
        BoostingParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            ..BoostingParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub enum Classifier<F> {
    GradientBoosting(GradientBoostedTrees<F>),
    Logistic(LogisticRegression<F>),
}

/// One model input column; categorical inputs remember the level table they
/// were encoded against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignColumn {
    pub name: String,
    pub levels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingProvenance {
    pub source: String,
    pub real_rows: usize,
    pub synthetic_rows: usize,
    pub row_ids: Vec<RowId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TrainedModel<F> {
    pub classifier: Classifier<F>,
    pub schema_fingerprint: String,
    pub design: Vec<DesignColumn>,
    pub provenance: TrainingProvenance,
    pub config: PredictorConfig,
}

const MODEL_KIND: &str = "trained-model";

fn design_of(d: &Dataset) -> Vec<DesignColumn> {
    d.design_columns()
        .into_iter()
        .map(|c| DesignColumn {
            name: d.schema().columns()[c].name.clone(),
            levels: d.levels(c).map(<[String]>::to_vec),
        })
        .collect()
}

/// Encodes `d` against a design, mapping categorical levels by name.
fn encode<F: Scalar>(d: &Dataset, design: &[DesignColumn]) -> Result<Array2<F>> {
    let mut m = Array2::<F>::zeros((d.n_rows(), design.len()));
    for (j, dc) in design.iter().enumerate() {
        let c = d
            .schema()
            .index_of(&dc.name)
            .ok_or_else(|| Error::Schema(format!("model input `{}` missing from data", dc.name)))?;
        match (d.column(c), &dc.levels) {
            (ColumnData::Continuous(v), None) => {
                for (r, x) in v.iter().enumerate() {
                    let x = x.ok_or_else(|| Error::Data(format!("missing `{}` at row {r}", dc.name)))?;
                    m[[r, j]] = F::from_f64(x).unwrap();
                }
            }
            (ColumnData::Categorical { levels, codes }, Some(model_levels)) => {
                let lookup: HashMap<&str, usize> =
                    model_levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
                let map: Vec<Option<usize>> = levels.iter().map(|l| lookup.get(l.as_str()).copied()).collect();
                for (r, code) in codes.iter().enumerate() {
                    let code = code.ok_or_else(|| Error::Data(format!("missing `{}` at row {r}", dc.name)))?;
                    let k = map[code as usize].ok_or_else(|| {
                        Error::Schema(format!(
                            "level `{}` of `{}` was not seen by the model",
                            levels[code as usize], dc.name
                        ))
                    })?;
                    m[[r, j]] = F::from_usize(k).unwrap();
                }
            }
            _ => return Err(Error::Schema(format!("model input `{}` changed kind", dc.name))),
        }
    }
    Ok(m)
}

pub fn train_classifier<F: Scalar>(train: &Dataset, cfg: &PredictorConfig) -> Result<TrainedModel<F>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let y = train.binary_labels()?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Training(format!(
            "single-class training set ({} rows, all {})",
            y.len(),
            if positives == 0 { "negative" } else { "positive" }
        )));
    }
    let design = design_of(train);
    let x = encode::<F>(train, &design)?;
    let classifier = match cfg.kind {
        PredictorKind::GradientBoosting => {
            Classifier::GradientBoosting(GradientBoostedTrees::fit(x.view(), &y, cfg.boosting()))
        }
        PredictorKind::Logistic => Classifier::Logistic(LogisticRegression::fit(x.view(), &y)),
    };
    Ok(TrainedModel {
        classifier,
        schema_fingerprint: train.schema().fingerprint(),
        design,
        provenance: TrainingProvenance {
            source: train.provenance.source.clone(),
            real_rows: train.real_rows(),
            synthetic_rows: train.synthetic_rows(),
            row_ids: train.row_ids().to_vec(),
        },
        config: *cfg,
    })
}

/// P(label = 1) for every row of `data`; the label column is ignored.
pub fn predict_scores<F: Scalar>(model: &TrainedModel<F>, data: &Dataset) -> Result<Vec<F>> {
    if data.schema().fingerprint() != model.schema_fingerprint {
        return Err(Error::Schema("data schema does not match the model's training schema".into()));
    }
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let x = encode::<F>(data, &model.design)?;
    Ok(match &model.classifier {
        Classifier::GradientBoosting(m) => m.predict_proba(&x),
        Classifier::Logistic(m) => m.predict_proba(&x),
    })
}

impl<F: Scalar> TrainedModel<F> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        artifact::save(MODEL_KIND, self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        artifact::load(MODEL_KIND, path)
    }
}
