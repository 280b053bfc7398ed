//! Reversible encoding of rows into the generator's output space:
//! continuous columns become (scaled offset, one-hot mode) under a fitted
//! mixture, categorical columns become one-hot over the levels seen in training.

use ndarray::{Array2, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::gmm::Mixture;
use crate::data::{ColumnData, Dataset, Provenance, RowId, Schema};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnTransform {
    Continuous {
        column: usize,
        mixture: Mixture,
    },
    Discrete {
        column: usize,
        /// Levels present in the training rows, sorted.
        levels: Vec<String>,
        counts: Vec<usize>,
    },
}

impl ColumnTransform {
    pub fn width(&self) -> usize {
        match self {
            ColumnTransform::Continuous { mixture, .. } => 1 + mixture.n_modes(),
            ColumnTransform::Discrete { levels, .. } => levels.len(),
        }
    }
}

/// Output activation of one contiguous block of generator outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanKind {
    Tanh,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    pub kind: SpanKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTransformer {
    pub schema: Schema,
    pub columns: Vec<ColumnTransform>,
    /// Full level table of each categorical schema column, as in the training data.
    pub tables: Vec<Option<Vec<String>>>,
}

/// Offsets are scaled by this many standard deviations of their mode.
const OFFSET_SCALE: f64 = 4.0;
const OFFSET_CLIP: f64 = 0.99;

impl DataTransformer {
    pub fn fit(d: &Dataset, max_modes: usize) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Training("cannot fit a transformer on an empty dataset".into()));
        }
        let mut columns = Vec::with_capacity(d.schema().len());
        for (j, col) in d.columns().iter().enumerate() {
            columns.push(match col {
                ColumnData::Continuous(v) => {
                    let values: Vec<f64> = v
                        .iter()
                        .map(|x| x.ok_or_else(|| Error::Data("missing value in generator training data".into())))
                        .collect::<Result<_>>()?;
                    ColumnTransform::Continuous {
                        column: j,
                        mixture: Mixture::fit(&values, max_modes),
                    }
                }
                ColumnData::Categorical { .. } => {
                    let counts = d.category_counts(j)?;
                    ColumnTransform::Discrete {
                        column: j,
                        levels: counts.keys().cloned().collect(),
                        counts: counts.values().copied().collect(),
                    }
                }
            });
        }
        Ok(Self {
            schema: d.schema().clone(),
            columns,
            tables: (0..d.schema().len()).map(|j| d.levels(j).map(<[String]>::to_vec)).collect(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.columns.iter().map(ColumnTransform::width).sum()
    }

    pub fn spans(&self) -> Vec<Span> {
        let mut out = Vec::new();
        let mut at = 0;
        for c in &self.columns {
            match c {
                ColumnTransform::Continuous { mixture, .. } => {
                    out.push(Span { start: at, len: 1, kind: SpanKind::Tanh });
                    out.push(Span {
                        start: at + 1,
                        len: mixture.n_modes(),
                        kind: SpanKind::Softmax,
                    });
                }
                ColumnTransform::Discrete { levels, .. } => out.push(Span {
                    start: at,
                    len: levels.len(),
                    kind: SpanKind::Softmax,
                }),
            }
            at += c.width();
        }
        out
    }

    /// Start offset of each column's block in the output vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.columns
            .iter()
            .scan(0, |at, c| {
                let s = *at;
                *at += c.width();
                Some(s)
            })
            .collect()
    }

    /// Encodes rows; the mode of each continuous value is sampled from its posterior.
    pub fn transform<F: Scalar>(&self, d: &Dataset, rng: &mut Rng) -> Result<Array2<F>> {
        let offsets = self.offsets();
        let mut m = Array2::<F>::zeros((d.n_rows(), self.output_dim()));
        let f = |v: f64| F::from_f64(v).unwrap();
        for (c, &off) in self.columns.iter().zip(&offsets) {
            match c {
                ColumnTransform::Continuous { column, mixture } => {
                    let v = d.values(*column).unwrap();
                    for r in 0..d.n_rows() {
                        let x = v[r].ok_or_else(|| Error::Data("missing value".into()))?;
                        let post = mixture.posterior(x);
                        let mode = WeightedIndex::new(&post).map(|w| w.sample(rng)).unwrap_or(0);
                        let alpha = ((x - mixture.means[mode]) / (OFFSET_SCALE * mixture.stds[mode]))
                            .clamp(-OFFSET_CLIP, OFFSET_CLIP);
                        m[[r, off]] = f(alpha);
                        m[[r, off + 1 + mode]] = F::one();
                    }
                }
                ColumnTransform::Discrete { column, levels, .. } => {
                    for r in 0..d.n_rows() {
                        let value = d
                            .category(*column, r)
                            .ok_or_else(|| Error::Data("missing categorical value".into()))?;
                        let k = levels.binary_search_by(|l| l.as_str().cmp(value)).map_err(|_| {
                            Error::Schema(format!("level `{value}` unseen during generator fit"))
                        })?;
                        m[[r, off + k]] = F::one();
                    }
                }
            }
        }
        Ok(m)
    }

    /// Decodes activated generator outputs back into rows.
    pub fn inverse<F: Scalar>(&self, out: ArrayView2<F>, row_ids: Vec<RowId>, provenance: Provenance) -> Result<Dataset> {
        let n = out.nrows();
        let offsets = self.offsets();
        let argmax = |r: usize, start: usize, len: usize| -> usize {
            let mut best = 0;
            for k in 1..len {
                if out[[r, start + k]] > out[[r, start + best]] {
                    best = k;
                }
            }
            best
        };
        let mut columns = Vec::with_capacity(self.columns.len());
        for (c, &off) in self.columns.iter().zip(&offsets) {
            columns.push(match c {
                ColumnTransform::Continuous { mixture, .. } => ColumnData::Continuous(
                    (0..n)
                        .map(|r| {
                            let alpha = out[[r, off]].to_f64().unwrap().clamp(-1.0, 1.0);
                            let mode = argmax(r, off + 1, mixture.n_modes());
                            Some(alpha * OFFSET_SCALE * mixture.stds[mode] + mixture.means[mode])
                        })
                        .collect(),
                ),
                ColumnTransform::Discrete { column, levels, .. } => {
                    let table = self.tables[*column].clone().expect("categorical column has a table");
                    let to_code: Vec<u32> = levels
                        .iter()
                        .map(|l| table.binary_search(l).expect("training level in table") as u32)
                        .collect();
                    ColumnData::Categorical {
                        codes: (0..n).map(|r| Some(to_code[argmax(r, off, levels.len())])).collect(),
                        levels: table,
                    }
                }
            });
        }
        Dataset::new(self.schema.clone(), columns, row_ids, provenance)
    }
}
