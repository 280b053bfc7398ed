//! Conditional vectors and training-by-sampling.
//!
//! During training a conditioned column is picked uniformly, a level is drawn
//! with probability proportional to log(1 + count), and a real row holding
//! that level is paired with the generated batch. At generation time levels
//! are drawn by their empirical frequency.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::transform::{ColumnTransform, DataTransformer};
use crate::data::Dataset;
use crate::seed::Rng;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondColumn {
    /// Index into the transformer's column list.
    pub transform_index: usize,
    /// Offset of this column's block within the conditional vector.
    pub cond_offset: usize,
    /// Offset of this column's one-hot block within the generator output.
    pub output_offset: usize,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSampler {
    pub columns: Vec<CondColumn>,
    pub dim: usize,
}

/// One drawn condition: which conditioned column and which level.
#[derive(Debug, Clone, Copy)]
pub struct Condition {
    pub column: usize,
    pub level: usize,
}

impl CondSampler {
    /// Conditions on every categorical column, except the label when
    /// `include_label` is false.
    pub fn new(t: &DataTransformer, include_label: bool) -> Self {
        let label = t.schema.label_index();
        let offsets = t.offsets();
        let mut columns = Vec::new();
        let mut dim = 0;
        for (i, c) in t.columns.iter().enumerate() {
            if let ColumnTransform::Discrete { column, counts, .. } = c {
                if *column == label && !include_label {
                    continue;
                }
                columns.push(CondColumn {
                    transform_index: i,
                    cond_offset: dim,
                    output_offset: offsets[i],
                    counts: counts.clone(),
                });
                dim += counts.len();
            }
        }
        Self { columns, dim }
    }

    fn draw(&self, rng: &mut Rng, log_frequency: bool) -> Option<Condition> {
        if self.columns.is_empty() {
            return None;
        }
        let column = rng.random_range(0..self.columns.len());
        let weights: Vec<f64> = self.columns[column]
            .counts
            .iter()
            .map(|&c| if log_frequency { (1.0 + c as f64).ln() } else { c as f64 })
            .collect();
        let level = WeightedIndex::new(&weights).expect("observed levels").sample(rng);
        Some(Condition { column, level })
    }

    pub fn draw_batch<F: Scalar>(&self, n: usize, rng: &mut Rng, log_frequency: bool) -> (Array2<F>, Vec<Option<Condition>>) {
        let mut m = Array2::zeros((n, self.dim));
        let conds: Vec<Option<Condition>> = (0..n).map(|_| self.draw(rng, log_frequency)).collect();
        for (r, c) in conds.iter().enumerate() {
            if let Some(c) = c {
                m[[r, self.columns[c.column].cond_offset + c.level]] = F::one();
            }
        }
        (m, conds)
    }
}

/// Row indices of the training data grouped by conditioned column and level.
pub struct RowIndex {
    by_level: Vec<Vec<Vec<usize>>>,
    n_rows: usize,
}

impl RowIndex {
    pub fn new(sampler: &CondSampler, t: &DataTransformer, d: &Dataset) -> Self {
        let by_level = sampler
            .columns
            .iter()
            .map(|cc| {
                let ColumnTransform::Discrete { column, levels, .. } = &t.columns[cc.transform_index] else {
                    unreachable!("conditioned columns are discrete")
                };
                let mut groups = vec![Vec::new(); levels.len()];
                for r in 0..d.n_rows() {
                    let v = d.category(*column, r).expect("preprocessed");
                    let k = levels.binary_search_by(|l| l.as_str().cmp(v)).expect("observed level");
                    groups[k].push(r);
                }
                groups
            })
            .collect();
        Self {
            by_level,
            n_rows: d.n_rows(),
        }
    }

    /// A real row matching `cond`, or a uniform row when unconditioned.
    pub fn sample(&self, cond: Option<Condition>, rng: &mut Rng) -> usize {
        match cond {
            Some(c) => {
                let rows = &self.by_level[c.column][c.level];
                rows[rng.random_range(0..rows.len())]
            }
            None => rng.random_range(0..self.n_rows),
        }
    }
}
