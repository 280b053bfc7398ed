use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset, Provenance, RowId, SplitTag};
use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};

/// Delimited-text reading options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableFormat {
    pub delimiter: char,
    /// Cell contents treated as missing, compared after trimming. The empty
    /// string is always missing.
    pub missing_markers: Vec<String>,
}

impl Default for TableFormat {
    fn default() -> Self {
        Self {
            delimiter: ',',
            missing_markers: Vec::new(),
        }
    }
}

impl TableFormat {
    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .map_err(|_| Error::Config(format!("delimiter {:?} is not a single byte", self.delimiter)))
    }

    fn is_missing(&self, cell: &str) -> bool {
        cell.is_empty() || self.missing_markers.iter().any(|m| m == cell)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema, format: &TableFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema, format, &path.display().to_string())
}

/// Parses a delimited table with a header row naming every schema column.
/// Extra columns in the file are ignored.
pub fn read_dataset<R: Read>(reader: R, schema: &Schema, format: &TableFormat, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter_byte()?)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{source}: cannot read header: {e}")))?
        .clone();
    let positions: Vec<usize> = schema
        .columns()
        .iter()
        .map(|c| {
            headers.iter().position(|h| h.trim() == c.name).ok_or_else(|| {
                Error::Schema(format!("schema mismatch: column `{}` not in header of {source}", c.name))
            })
        })
        .collect::<Result<_>>()?;

    let mut continuous: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.len()];
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.len()];
    let mut n = 0usize;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{source}: row {}: {e}", row + 1)))?;
        for (j, (spec, &pos)) in schema.columns().iter().zip(&positions).enumerate() {
            let cell = record.get(pos).unwrap_or("").trim();
            let missing = format.is_missing(cell);
            match spec.kind {
                ColumnKind::Continuous => {
                    let v = if missing {
                        None
                    } else {
                        let v: f64 = cell.parse().map_err(|_| Error::Parse {
                            row: row + 1,
                            column: spec.name.clone(),
                            message: format!("`{cell}` is not a number"),
                        })?;
                        Some(v)
                    };
                    continuous[j].push(v);
                }
                ColumnKind::Categorical => raw[j].push((!missing).then(|| cell.to_owned())),
            }
        }
        n += 1;
    }

    let columns = schema
        .columns()
        .iter()
        .enumerate()
        .map(|(j, spec)| match spec.kind {
            ColumnKind::Continuous => ColumnData::Continuous(std::mem::take(&mut continuous[j])),
            ColumnKind::Categorical => ColumnData::categorical_from_strings(&raw[j]),
        })
        .collect();
    Dataset::new(
        schema.clone(),
        columns,
        (0..n as u64).map(RowId::Real).collect(),
        Provenance::new(source, SplitTag::Whole),
    )
}

/// Writes the dataset in the same delimited format it is read from.
pub fn write_dataset<W: Write>(d: &Dataset, writer: W, format: &TableFormat) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter_byte()?)
        .from_writer(writer);
    let to_err = |e: csv::Error| Error::Data(format!("write failed: {e}"));
    w.write_record(d.schema().columns().iter().map(|c| c.name.as_str()))
        .map_err(to_err)?;
    let mut cells = Vec::with_capacity(d.schema().len());
    for r in 0..d.n_rows() {
        cells.clear();
        for (j, col) in d.columns().iter().enumerate() {
            cells.push(match col {
                ColumnData::Continuous(v) => v[r].map(|x| x.to_string()).unwrap_or_default(),
                ColumnData::Categorical { .. } => d.category(j, r).unwrap_or("").to_owned(),
            });
        }
        w.write_record(&cells).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("write failed: {e}")))?;
    Ok(())
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>, format: &TableFormat) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(d, std::io::BufWriter::new(file), format)
}
