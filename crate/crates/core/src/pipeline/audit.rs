use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RowId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    Model,
    Generator,
}

/// One provenance check: the rows a model or generator was fitted on
/// against the rows it was evaluated on (for generators, every test row).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub subject: String,
    pub kind: AuditKind,
    pub training_rows: usize,
    pub evaluation_rows: usize,
    pub overlap: usize,
    /// Generator rows that are not in the subpopulation's training split.
    pub outside_training_split: usize,
}

impl AuditRecord {
    pub fn passed(&self) -> bool {
        self.overlap == 0 && self.outside_training_split == 0
    }

    pub fn model(subject: impl Into<String>, training: &[RowId], evaluation: &Dataset) -> Self {
        let eval: HashSet<&RowId> = evaluation.row_ids().iter().collect();
        AuditRecord {
            subject: subject.into(),
            kind: AuditKind::Model,
            training_rows: training.len(),
            evaluation_rows: evaluation.n_rows(),
            overlap: training.iter().filter(|r| eval.contains(r)).count(),
            outside_training_split: 0,
        }
    }

    pub fn generator(subject: impl Into<String>, seen: &[RowId], train_split: &Dataset, all_test: &Dataset) -> Self {
        let test: HashSet<&RowId> = all_test.row_ids().iter().collect();
        let train: HashSet<&RowId> = train_split.row_ids().iter().collect();
        AuditRecord {
            subject: subject.into(),
            kind: AuditKind::Generator,
            training_rows: seen.len(),
            evaluation_rows: all_test.n_rows(),
            overlap: seen.iter().filter(|r| test.contains(r)).count(),
            outside_training_split: seen.iter().filter(|r| !train.contains(r)).count(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub records: Vec<AuditRecord>,
}

impl LeakageAudit {
    pub fn push(&mut self, record: AuditRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: &LeakageAudit) {
        self.records.extend(other.records.iter().cloned());
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(AuditRecord::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(|r| !r.passed())
    }
}
