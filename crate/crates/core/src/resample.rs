//! Rebalancing baselines keyed on a class column (the population marker in
//! the experiments): SMOTE oversampling and random under-sampling.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, ColumnKind, Dataset, RowId};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_K_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Smote,
    Rus,
}

/// Under-sampling strategy. `All` draws the minimum class count from every class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RusStrategy {
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub method: ResampleMethod,
    pub class_column: String,
    pub before: BTreeMap<String, usize>,
    pub after: BTreeMap<String, usize>,
    pub k_neighbors: Option<usize>,
    pub seed: u64,
}

fn class_groups(d: &Dataset, class_column: &str) -> Result<(usize, BTreeMap<u32, Vec<usize>>)> {
    let col = d
        .schema()
        .index_of(class_column)
        .ok_or_else(|| Error::Schema(format!("no column named `{class_column}`")))?;
    let codes = d
        .codes(col)
        .ok_or_else(|| Error::Resample(format!("class column `{class_column}` is not categorical")))?;
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (r, c) in codes.iter().enumerate() {
        let c = c.ok_or_else(|| Error::Data(format!("missing `{class_column}` at row {r}")))?;
        groups.entry(c).or_default().push(r);
    }
    Ok((col, groups))
}

fn counts(d: &Dataset, col: usize, groups: &BTreeMap<u32, Vec<usize>>) -> BTreeMap<String, usize> {
    let levels = d.levels(col).unwrap();
    groups
        .iter()
        .map(|(c, rows)| (levels[*c as usize].clone(), rows.len()))
        .collect()
}

/// Continuous columns as dense rows, plus their standardized copy.
fn continuous_matrix(d: &Dataset) -> Result<(Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let cols: Vec<usize> = d
        .schema()
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Continuous)
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return Err(Error::Resample("SMOTE needs at least one continuous feature".into()));
    }
    let n = d.n_rows();
    let mut raw = vec![vec![0.0; cols.len()]; n];
    for (j, &c) in cols.iter().enumerate() {
        let v = d.values(c).unwrap();
        for r in 0..n {
            raw[r][j] = v[r].ok_or_else(|| Error::Data(format!("missing value at row {r}; preprocess first")))?;
        }
    }
    let mut scaled = raw.clone();
    for j in 0..cols.len() {
        let mean = raw.iter().map(|x| x[j]).sum::<f64>() / n as f64;
        let var = raw.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for row in scaled.iter_mut() {
            row[j] = (row[j] - mean) / sd;
        }
    }
    Ok((cols, raw, scaled))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Oversamples every class up to the majority count by interpolating
/// continuous features toward one of the k nearest same-class neighbours.
/// Categorical cells of a synthetic row are copied from its parent.
pub fn smote_oversample(train: &Dataset, class_column: &str, k: usize, seed: u64) -> Result<(Dataset, ResampleReport)> {
    if k == 0 {
        return Err(Error::Config("SMOTE needs k >= 1".into()));
    }
    let (col, groups) = class_groups(train, class_column)?;
    let before = counts(train, col, &groups);
    if let Some((name, n)) = before.iter().find(|(_, &n)| n < 2) {
        return Err(Error::Resample(format!("class `{name}` has {n} row(s); SMOTE needs at least 2")));
    }
    let majority = before.values().copied().max().unwrap_or(0);
    let report = |after| ResampleReport {
        method: ResampleMethod::Smote,
        class_column: class_column.to_owned(),
        before: before.clone(),
        after,
        k_neighbors: Some(k),
        seed,
    };
    if before.values().all(|&n| n == majority) {
        return Ok((train.clone(), report(before.clone())));
    }

    let (cont_cols, raw, scaled) = continuous_matrix(train)?;
    let mut rng = seed::rng(seed);
    let mut synth_cont: Vec<Vec<f64>> = Vec::new();
    let mut parents: Vec<usize> = Vec::new();

    for (code, rows) in &groups {
        let need = majority - rows.len();
        if need == 0 {
            continue;
        }
        let k_eff = k.min(rows.len() - 1);
        if k_eff < k {
            warn!(
                "class `{}` has {} rows; SMOTE using k={k_eff} instead of {k}",
                train.levels(col).unwrap()[*code as usize],
                rows.len()
            );
        }
        let neighbours: Vec<Vec<usize>> = rows
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = rows
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (squared_distance(&scaled[i], &scaled[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k_eff).map(|(_, j)| j).collect()
            })
            .collect();
        for _ in 0..need {
            let p = rng.random_range(0..rows.len());
            let parent = rows[p];
            let nn = neighbours[p][rng.random_range(0..k_eff)];
            let lambda: f64 = rng.random();
            let point = raw[parent]
                .iter()
                .zip(&raw[nn])
                .map(|(&a, &b)| (a + lambda * (b - a)).clamp(a.min(b), a.max(b)))
                .collect();
            synth_cont.push(point);
            parents.push(parent);
        }
    }

    let mut synthetic = train.select(&parents);
    let mut columns: Vec<ColumnData> = synthetic.columns().to_vec();
    for (j, &c) in cont_cols.iter().enumerate() {
        columns[c] = ColumnData::Continuous(synth_cont.iter().map(|p| Some(p[j])).collect());
    }
    let ids = (0..parents.len() as u64)
        .map(|index| RowId::Synthetic { batch: seed, index })
        .collect();
    synthetic = Dataset::new(train.schema().clone(), columns, ids, train.provenance.clone())?;
    let out = train.concat(&synthetic)?;
    let after = counts(&out, col, &class_groups(&out, class_column)?.1);
    Ok((out, report(after)))
}

/// Draws, without replacement, the minimum class count from every class.
/// Output rows keep their input order.
pub fn random_undersample(
    d: &Dataset,
    class_column: &str,
    strategy: RusStrategy,
    seed: u64,
) -> Result<(Dataset, ResampleReport)> {
    let RusStrategy::All = strategy;
    let (col, groups) = class_groups(d, class_column)?;
    if groups.len() < 2 {
        return Err(Error::Resample(format!(
            "random under-sampling needs at least 2 classes in `{class_column}`, found {}",
            groups.len()
        )));
    }
    let before = counts(d, col, &groups);
    let minimum = groups.values().map(Vec::len).min().unwrap();
    let mut rng = seed::rng(seed);
    let mut keep = Vec::with_capacity(minimum * groups.len());
    for rows in groups.values() {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        keep.extend_from_slice(&rows[..minimum]);
    }
    keep.sort_unstable();
    let out = d.select(&keep);
    let after = counts(&out, col, &class_groups(&out, class_column)?.1);
    Ok((
        out,
        ResampleReport {
            method: ResampleMethod::Rus,
            class_column: class_column.to_owned(),
            before,
            after,
            k_neighbors: None,
            seed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, Provenance, Schema, SplitTag};
    use std::collections::HashSet;

    fn dataset(classes: &[(&str, usize)]) -> Dataset {
        let schema = Schema::new(vec![
            ColumnSpec::continuous("a"),
            ColumnSpec::continuous("b"),
            ColumnSpec::categorical("c"),
            ColumnSpec::label("y"),
            ColumnSpec::population_marker("pm"),
        ])
        .unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        let mut y = Vec::new();
        let mut pm = Vec::new();
        let mut i = 0usize;
        for (name, n) in classes {
            for _ in 0..*n {
                a.push(Some((i * 37 % 11) as f64));
                b.push(Some((i * 13 % 7) as f64 * 10.0));
                c.push(Some(if i % 3 == 0 { "u" } else { "v" }));
                y.push(Some(if i % 2 == 0 { "0" } else { "1" }));
                pm.push(Some(*name));
                i += 1;
            }
        }
        Dataset::new(
            schema,
            vec![
                ColumnData::Continuous(a),
                ColumnData::Continuous(b),
                ColumnData::categorical_from_strings(&c),
                ColumnData::categorical_from_strings(&y),
                ColumnData::categorical_from_strings(&pm),
            ],
            (0..i as u64).map(RowId::Real).collect(),
            Provenance::new("t", SplitTag::Train),
        )
        .unwrap()
    }

    #[test]
    fn smote_balances_to_majority() {
        let d = dataset(&[("A", 10), ("B", 4)]);
        let (out, rep) = smote_oversample(&d, "pm", 5, 1).unwrap();
        assert_eq!(rep.after, BTreeMap::from([("A".into(), 10), ("B".into(), 10)]));
        assert_eq!(out.n_rows(), 20);
        assert_eq!(&out.row_ids()[..14], d.row_ids());
    }

    #[test]
    fn smote_balanced_input_unchanged() {
        let d = dataset(&[("A", 5), ("B", 5)]);
        let (out, rep) = smote_oversample(&d, "pm", 5, 1).unwrap();
        assert_eq!(out, d);
        assert_eq!(rep.before, rep.after);
    }

    #[test]
    fn smote_rejects_tiny_class() {
        let d = dataset(&[("A", 5), ("B", 1)]);
        assert!(matches!(smote_oversample(&d, "pm", 5, 1), Err(Error::Resample(_))));
    }

    #[test]
    fn smote_copies_categoricals_from_parents() {
        let d = dataset(&[("A", 30), ("B", 6)]);
        let (out, _) = smote_oversample(&d, "pm", 3, 9).unwrap();
        for r in d.n_rows()..out.n_rows() {
            assert_eq!(out.category(4, r), Some("B"));
        }
    }

    #[test]
    fn rus_equalizes_to_minimum() {
        let d = dataset(&[("A", 100), ("B", 20), ("C", 5)]);
        let (out, rep) = random_undersample(&d, "pm", RusStrategy::All, 3).unwrap();
        assert!(rep.after.values().all(|&n| n == 5));
        assert_eq!(out.n_rows(), 15);
        let input: HashSet<RowId> = d.row_ids().iter().copied().collect();
        let output: HashSet<RowId> = out.row_ids().iter().copied().collect();
        assert_eq!(output.len(), 15);
        assert!(output.is_subset(&input));
    }

    #[test]
    fn rus_on_equal_counts_keeps_everything() {
        let d = dataset(&[("A", 4), ("B", 4)]);
        let (out, _) = random_undersample(&d, "pm", RusStrategy::All, 3).unwrap();
        assert_eq!(out.row_ids(), d.row_ids());
    }

    #[test]
    fn rus_single_class_is_error() {
        let d = dataset(&[("A", 4)]);
        assert!(matches!(
            random_undersample(&d, "pm", RusStrategy::All, 3),
            Err(Error::Resample(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let d = dataset(&[("A", 40), ("B", 7), ("C", 3)]);
        assert_eq!(smote_oversample(&d, "pm", 5, 4).unwrap().0, smote_oversample(&d, "pm", 5, 4).unwrap().0);
        assert_eq!(
            random_undersample(&d, "pm", RusStrategy::All, 4).unwrap().0,
            random_undersample(&d, "pm", RusStrategy::All, 4).unwrap().0
        );
    }
}
