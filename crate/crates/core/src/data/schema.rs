use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Label,
    PopulationMarker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Continuous, ColumnRole::Feature)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Feature)
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Label)
    }

    pub fn population_marker(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::PopulationMarker)
    }
}

/// Ordered column declarations with exactly one label and one population marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
    #[serde(skip)]
    label: usize,
    #[serde(skip)]
    marker: usize,
}

#[derive(Deserialize)]
struct SchemaDoc {
    columns: Vec<ColumnSpec>,
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = SchemaDoc::deserialize(de)?;
        Schema::new(doc.columns).map_err(serde::de::Error::custom)
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        let find_role = |role: ColumnRole, what: &str| -> Result<usize> {
            let hits: Vec<usize> = columns
                .iter()
                .enumerate()
                .filter(|(_, c)| c.role == role)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => {
                    if columns[*i].kind != ColumnKind::Categorical {
                        Err(Error::Schema(format!(
                            "{what} column `{}` must be categorical",
                            columns[*i].name
                        )))
                    } else {
                        Ok(*i)
                    }
                }
                [] => Err(Error::Schema(format!("schema has no {what} column"))),
                _ => Err(Error::Schema(format!("schema has {} {what} columns", hits.len()))),
            }
        };
        let label = find_role(ColumnRole::Label, "label")?;
        let marker = find_role(ColumnRole::PopulationMarker, "population-marker")?;
        Ok(Self {
            columns,
            label,
            marker,
        })
    }

    /// Reads a schema document (TOML, or JSON when the extension is `.json`).
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            crate::config::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn label_index(&self) -> usize {
        self.label
    }

    pub fn marker_index(&self) -> usize {
        self.marker
    }

    pub fn label_name(&self) -> &str {
        &self.columns[self.label].name
    }

    pub fn marker_name(&self) -> &str {
        &self.columns[self.marker].name
    }

    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ColumnRole::Feature)
            .map(|(i, _)| i)
    }

    /// Hex SHA-256 over the ordered (name, kind, role) triples.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update((c.name.len() as u64).to_le_bytes());
            h.update(c.name.as_bytes());
            h.update([c.kind as u8, c.role as u8]);
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> Vec<ColumnSpec> {
        vec![
            ColumnSpec::continuous("age"),
            ColumnSpec::categorical("sex"),
            ColumnSpec::label("died"),
            ColumnSpec::population_marker("ethnicity"),
        ]
    }

    #[test]
    fn valid_schema() {
        let s = Schema::new(cols()).unwrap();
        assert_eq!(s.label_name(), "died");
        assert_eq!(s.marker_name(), "ethnicity");
        assert_eq!(s.feature_indices().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn rejects_bad_roles() {
        let mut c = cols();
        c.push(ColumnSpec::label("other_label"));
        assert!(matches!(Schema::new(c), Err(Error::Schema(_))));

        let mut c = cols();
        c.remove(3);
        assert!(matches!(Schema::new(c), Err(Error::Schema(_))));

        let mut c = cols();
        c[2].kind = ColumnKind::Continuous;
        assert!(matches!(Schema::new(c), Err(Error::Schema(_))));

        let mut c = cols();
        c.push(ColumnSpec::continuous("age"));
        assert!(matches!(Schema::new(c), Err(Error::Schema(_))));
    }

    #[test]
    fn fingerprint_tracks_layout() {
        let a = Schema::new(cols()).unwrap();
        let mut c = cols();
        c.swap(0, 1);
        let b = Schema::new(c).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), Schema::new(cols()).unwrap().fingerprint());
    }

    #[test]
    fn parses_toml_document() {
        let doc = r#"
            [[columns]]
            name = "age"
            kind = "continuous"
            role = "feature"

            [[columns]]
            name = "died"
            kind = "categorical"
            role = "label"

            [[columns]]
            name = "ethnicity"
            kind = "categorical"
            role = "population_marker"
        "#;
        let s: Schema = crate::config::from_toml(doc).unwrap();
        assert_eq!(s.len(), 3);
    }
}
