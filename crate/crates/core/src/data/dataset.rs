use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};
use crate::Scalar;

/// Row identity, preserved through selection, resampling and augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowId {
    Real(u64),
    Synthetic { batch: u64, index: u64 },
}

impl RowId {
    pub fn is_real(&self) -> bool {
        matches!(self, RowId::Real(_))
    }
}

/// Which side of a split a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Whole,
    Train,
    Test,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub split: SplitTag,
}

impl Provenance {
    pub fn new(source: impl Into<String>, split: SplitTag) -> Self {
        Self {
            source: source.into(),
            split,
        }
    }
}

/// Column storage. Categorical cells are codes into `levels`, which is kept
/// sorted lexicographically so codes do not depend on row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Continuous(Vec<Option<f64>>),
    Categorical {
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Continuous(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    /// Builds a categorical column from raw strings, coding against the sorted level set.
    pub fn categorical_from_strings<S: AsRef<str>>(values: &[Option<S>]) -> Self {
        let levels: BTreeSet<&str> = values.iter().flatten().map(|s| s.as_ref()).collect();
        let levels: Vec<String> = levels.into_iter().map(str::to_owned).collect();
        let codes = values
            .iter()
            .map(|v| {
                v.as_ref()
                    .map(|s| levels.binary_search_by(|l| l.as_str().cmp(s.as_ref())).unwrap() as u32)
            })
            .collect();
        ColumnData::Categorical { levels, codes }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }
}

/// Typed tabular data with schema roles and per-row identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<ColumnData>,
    row_ids: Vec<RowId>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        columns: Vec<ColumnData>,
        row_ids: Vec<RowId>,
        provenance: Provenance,
    ) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} columns supplied for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        for (spec, col) in schema.columns().iter().zip(&columns) {
            let kind_ok = matches!(
                (spec.kind, col),
                (ColumnKind::Continuous, ColumnData::Continuous(_))
                    | (ColumnKind::Categorical, ColumnData::Categorical { .. })
            );
            if !kind_ok {
                return Err(Error::Schema(format!("column `{}` has the wrong kind", spec.name)));
            }
            if col.len() != row_ids.len() {
                return Err(Error::Schema(format!(
                    "column `{}` has {} cells, expected {}",
                    spec.name,
                    col.len(),
                    row_ids.len()
                )));
            }
            if let ColumnData::Categorical { levels, codes } = col {
                if levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!(
                        "column `{}` levels are not sorted and unique",
                        spec.name
                    )));
                }
                if codes.iter().flatten().any(|&c| c as usize >= levels.len()) {
                    return Err(Error::Schema(format!("column `{}` has an out-of-range code", spec.name)));
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            row_ids,
            provenance,
        })
    }

    /// An empty dataset sharing `template`'s schema and category tables.
    pub fn empty_like(template: &Dataset, provenance: Provenance) -> Self {
        let mut d = template.select(&[]);
        d.provenance = provenance;
        d
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &ColumnData {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&ColumnData> {
        let i = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::Schema(format!("no column named `{name}`")))?;
        Ok(&self.columns[i])
    }

    pub fn row_ids(&self) -> &[RowId] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn real_rows(&self) -> usize {
        self.row_ids.iter().filter(|r| r.is_real()).count()
    }

    pub fn synthetic_rows(&self) -> usize {
        self.n_rows() - self.real_rows()
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| (0..c.len()).any(|r| c.is_missing(r)))
    }

    pub fn levels(&self, column: usize) -> Option<&[String]> {
        match &self.columns[column] {
            ColumnData::Categorical { levels, .. } => Some(levels),
            ColumnData::Continuous(_) => None,
        }
    }

    pub fn codes(&self, column: usize) -> Option<&[Option<u32>]> {
        match &self.columns[column] {
            ColumnData::Categorical { codes, .. } => Some(codes),
            ColumnData::Continuous(_) => None,
        }
    }

    pub fn values(&self, column: usize) -> Option<&[Option<f64>]> {
        match &self.columns[column] {
            ColumnData::Continuous(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    /// String value of a categorical cell.
    pub fn category(&self, column: usize, row: usize) -> Option<&str> {
        match &self.columns[column] {
            ColumnData::Categorical { levels, codes } => codes[row].map(|c| levels[c as usize].as_str()),
            ColumnData::Continuous(_) => None,
        }
    }

    pub fn marker_value(&self, row: usize) -> Option<&str> {
        self.category(self.schema.marker_index(), row)
    }

    /// Count of rows per level of a categorical column (levels with zero rows omitted).
    pub fn category_counts(&self, column: usize) -> Result<BTreeMap<String, usize>> {
        let ColumnData::Categorical { levels, codes } = &self.columns[column] else {
            return Err(Error::Schema(format!(
                "column `{}` is not categorical",
                self.schema.columns()[column].name
            )));
        };
        let mut out = BTreeMap::new();
        for c in codes.iter().flatten() {
            *out.entry(levels[*c as usize].clone()).or_insert(0) += 1;
        }
        Ok(out)
    }

    /// Code-table sidecar: categorical column name → ordered levels.
    pub fn code_tables(&self) -> BTreeMap<String, Vec<String>> {
        self.schema
            .columns()
            .iter()
            .zip(&self.columns)
            .filter_map(|(spec, col)| match col {
                ColumnData::Categorical { levels, .. } => Some((spec.name.clone(), levels.clone())),
                ColumnData::Continuous(_) => None,
            })
            .collect()
    }

    /// Rows at `rows`, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Re-codes categorical columns against `reference`'s level tables.
    /// Fails when a level present here is unknown to the reference.
    pub fn align_to(&self, reference: &Dataset) -> Result<Dataset> {
        if self.schema.fingerprint() != reference.schema.fingerprint() {
            return Err(Error::Schema("schema fingerprint mismatch".into()));
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for (i, (col, rcol)) in self.columns.iter().zip(&reference.columns).enumerate() {
            match (col, rcol) {
                (
                    ColumnData::Categorical { levels, codes },
                    ColumnData::Categorical { levels: rlevels, .. },
                ) if levels != rlevels => {
                    let map: Vec<Option<u32>> = levels
                        .iter()
                        .map(|l| rlevels.binary_search(l).ok().map(|p| p as u32))
                        .collect();
                    let mut new_codes = Vec::with_capacity(codes.len());
                    for c in codes {
                        new_codes.push(match c {
                            None => None,
                            Some(c) => Some(map[*c as usize].ok_or_else(|| {
                                Error::Schema(format!(
                                    "level `{}` of column `{}` is unknown to the reference table",
                                    levels[*c as usize],
                                    self.schema.columns()[i].name
                                ))
                            })?),
                        });
                    }
                    columns.push(ColumnData::Categorical {
                        levels: rlevels.clone(),
                        codes: new_codes,
                    });
                }
                _ => columns.push(col.clone()),
            }
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            columns,
            row_ids: self.row_ids.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Appends `other`'s rows; categorical tables are merged into their sorted union.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.schema.fingerprint() != other.schema.fingerprint() {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for (a, b) in self.columns.iter().zip(&other.columns) {
            columns.push(match (a, b) {
                (ColumnData::Continuous(x), ColumnData::Continuous(y)) => {
                    ColumnData::Continuous(x.iter().chain(y).copied().collect())
                }
                (
                    ColumnData::Categorical { levels: la, codes: ca },
                    ColumnData::Categorical { levels: lb, codes: cb },
                ) => {
                    if la == lb {
                        ColumnData::Categorical {
                            levels: la.clone(),
                            codes: ca.iter().chain(cb).copied().collect(),
                        }
                    } else {
                        let union: BTreeSet<&String> = la.iter().chain(lb).collect();
                        let levels: Vec<String> = union.into_iter().cloned().collect();
                        let remap = |from: &[String]| -> Vec<u32> {
                            from.iter()
                                .map(|l| levels.binary_search(l).unwrap() as u32)
                                .collect()
                        };
                        let (ma, mb) = (remap(la), remap(lb));
                        let codes = ca
                            .iter()
                            .map(|c| c.map(|c| ma[c as usize]))
                            .chain(cb.iter().map(|c| c.map(|c| mb[c as usize])))
                            .collect();
                        ColumnData::Categorical { levels, codes }
                    }
                }
                _ => unreachable!("schemas with equal fingerprints have equal kinds"),
            });
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            columns,
            row_ids: self.row_ids.iter().chain(&other.row_ids).copied().collect(),
            provenance: self.provenance.clone(),
        })
    }

    /// Binary outcome per row. The positive class is the second level of a
    /// two-level label table, or a truthy level name when only one level exists.
    pub fn binary_labels(&self) -> Result<Vec<u8>> {
        let li = self.schema.label_index();
        let levels = self.levels(li).expect("label is categorical");
        let positive: u32 = match levels.len() {
            0 => return Ok(Vec::new()),
            1 => {
                let truthy = matches!(
                    levels[0].to_ascii_lowercase().as_str(),
                    "1" | "true" | "yes" | "positive"
                );
                if truthy {
                    0
                } else {
                    u32::MAX
                }
            }
            2 => 1,
            n => {
                return Err(Error::Schema(format!(
                    "label `{}` has {n} levels; a binary outcome is required",
                    self.schema.label_name()
                )))
            }
        };
        self.codes(li)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(r, c)| match c {
                Some(c) => Ok(u8::from(*c == positive)),
                None => Err(Error::Data(format!("missing label at row {r}"))),
            })
            .collect()
    }

    /// Design matrix over feature columns plus the population marker
    /// (categorical codes as numbers). Missing cells are rejected.
    pub fn design_matrix<F: Scalar>(&self) -> Result<Array2<F>> {
        let cols = self.design_columns();
        let mut m = Array2::<F>::zeros((self.n_rows(), cols.len()));
        for (j, &c) in cols.iter().enumerate() {
            for r in 0..self.n_rows() {
                let v = match &self.columns[c] {
                    ColumnData::Continuous(v) => v[r],
                    ColumnData::Categorical { codes, .. } => codes[r].map(f64::from),
                };
                let v = v.ok_or_else(|| {
                    Error::Data(format!(
                        "missing value in column `{}` row {r}; preprocess first",
                        self.schema.columns()[c].name
                    ))
                })?;
                m[[r, j]] = F::from_f64(v).unwrap();
            }
        }
        Ok(m)
    }

    /// Column indices used as model inputs, in design-matrix order.
    pub fn design_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.schema.feature_indices().collect();
        cols.push(self.schema.marker_index());
        cols
    }
}
