use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;

use super::dataset::{Dataset, Provenance, SplitTag};
use super::schema::ColumnKind;
use crate::error::{Error, Result};
use crate::seed;

/// Default share of rows assigned to training.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.65;

/// Drops every row holding a missing cell. Category tables are kept as
/// discovered at load, so codes stay stable and the operation is idempotent.
pub fn preprocess(d: &Dataset) -> Result<Dataset> {
    let keep: Vec<usize> = (0..d.n_rows())
        .filter(|&r| d.columns().iter().all(|c| !c.is_missing(r)))
        .collect();
    if keep.is_empty() {
        return Err(Error::Data(format!(
            "every row of `{}` has a missing cell",
            d.provenance.source
        )));
    }
    if keep.len() < d.n_rows() {
        log::info!(
            "preprocess dropped {} of {} rows with missing cells",
            d.n_rows() - keep.len(),
            d.n_rows()
        );
    }
    Ok(d.select(&keep))
}

/// Disjoint per-marker subsets of a dataset.
#[derive(Debug, Clone)]
pub struct SubpopulationPartition {
    pub subsets: BTreeMap<String, Dataset>,
    pub excluded: BTreeSet<String>,
    /// Rows whose marker is excluded; they stay in the full population.
    pub excluded_rows: Dataset,
}

impl SubpopulationPartition {
    pub fn sizes(&self) -> BTreeMap<String, usize> {
        self.subsets.iter().map(|(k, v)| (k.clone(), v.n_rows())).collect()
    }
}

pub fn partition_by_pm(d: &Dataset, excluded: &BTreeSet<String>) -> Result<SubpopulationPartition> {
    let pm = d.schema().marker_index();
    let codes = d
        .codes(pm)
        .ok_or_else(|| Error::Schema("population marker column is not categorical".into()))?;
    let levels = d.levels(pm).unwrap();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut rest = Vec::new();
    for (r, c) in codes.iter().enumerate() {
        let c = c.ok_or_else(|| Error::Data(format!("missing population marker at row {r}; preprocess first")))?;
        let value = &levels[c as usize];
        if excluded.contains(value) {
            rest.push(r);
        } else {
            groups.entry(value.clone()).or_default().push(r);
        }
    }
    Ok(SubpopulationPartition {
        subsets: groups
            .into_iter()
            .map(|(k, rows)| {
                let sub = d.select(&rows).with_provenance(Provenance::new(
                    format!("{}[{}={k}]", d.provenance.source, d.schema().marker_name()),
                    d.provenance.split,
                ));
                (k, sub)
            })
            .collect(),
        excluded: excluded.clone(),
        excluded_rows: d.select(&rest),
    })
}

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_fraction: f64,
    pub stratify_column: String,
}

/// Per-stratum train counts: floor allocation plus largest-remainder
/// correction so that the total equals round(fraction * n). Singleton strata
/// go wholly to train and are left out of the correction.
pub fn allocate_train_counts(stratum_sizes: &[usize], fraction: f64) -> Vec<usize> {
    let mut counts = vec![0usize; stratum_sizes.len()];
    let mut remainders = Vec::new();
    let mut pooled = 0usize;
    for (i, &n) in stratum_sizes.iter().enumerate() {
        if n == 1 {
            counts[i] = 1;
            continue;
        }
        let exact = fraction * n as f64;
        counts[i] = exact.floor() as usize;
        remainders.push((i, exact - exact.floor()));
        pooled += n;
    }
    let target = (fraction * pooled as f64).round() as usize;
    let assigned: usize = remainders.iter().map(|(i, _)| counts[*i]).sum();
    let deficit = target.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (i, _) in remainders.into_iter().take(deficit) {
        counts[i] += 1;
    }
    counts
}

pub fn stratified_split(d: &Dataset, train_fraction: f64, stratify_column: &str, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} is outside (0, 1)")));
    }
    let col = d
        .schema()
        .index_of(stratify_column)
        .ok_or_else(|| Error::Schema(format!("no column named `{stratify_column}`")))?;
    if d.schema().columns()[col].kind != ColumnKind::Categorical {
        return Err(Error::Config(format!("stratify column `{stratify_column}` is not categorical")));
    }
    let codes = d.codes(col).unwrap();
    let mut strata: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (r, c) in codes.iter().enumerate() {
        let c = c.ok_or_else(|| Error::Data(format!("missing `{stratify_column}` at row {r}")))?;
        strata.entry(c).or_default().push(r);
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let counts = allocate_train_counts(&sizes, train_fraction);

    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((code, rows), take) in strata.iter().zip(counts) {
        if rows.len() == 1 {
            warn!(
                "stratum `{}` of `{stratify_column}` has a single row; assigning it to train",
                d.levels(col).unwrap()[*code as usize]
            );
        }
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..take]);
        test.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let source = &d.provenance.source;
    Ok(SplitPair {
        train: d
            .select(&train)
            .with_provenance(Provenance::new(format!("{source}/train"), SplitTag::Train)),
        test: d
            .select(&test)
            .with_provenance(Provenance::new(format!("{source}/test"), SplitTag::Test)),
        train_fraction,
        stratify_column: stratify_column.to_owned(),
    })
}
