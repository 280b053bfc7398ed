use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sweep::{PointOutcome, SweepResult};
use crate::data::{write_dataset, Dataset, Schema, TableFormat};
use crate::Result;

/// Hex SHA-256 of the dataset's delimited-text rendering.
pub fn dataset_hash(d: &Dataset) -> Result<String> {
    let mut bytes = Vec::new();
    write_dataset(d, &mut bytes, &TableFormat::default())?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStatus {
    pub sp: String,
    pub fraction: f64,
    pub status: String,
    pub stage: Option<String>,
    pub message: Option<String>,
}

impl PointStatus {
    pub fn from_sweep(sweep: &SweepResult) -> Vec<PointStatus> {
        sweep
            .points
            .iter()
            .map(|p| match &p.outcome {
                PointOutcome::Completed { .. } => PointStatus {
                    sp: p.sp.clone(),
                    fraction: p.fraction,
                    status: "completed".into(),
                    stage: None,
                    message: None,
                },
                PointOutcome::Failed { stage, message } => PointStatus {
                    sp: p.sp.clone(),
                    fraction: p.fraction,
                    status: "failed".into(),
                    stage: Some(stage.clone()),
                    message: Some(message.clone()),
                },
            })
            .collect()
    }
}

/// Everything needed to audit or re-run a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub status: String,
    pub dataset_source: String,
    pub dataset_hash: String,
    pub dataset_rows: usize,
    pub schema: Schema,
    pub schema_fingerprint: String,
    pub configs: serde_json::Value,
    pub split_protocols: BTreeMap<String, String>,
    pub subpopulation_sizes: BTreeMap<String, usize>,
    pub targets: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub points: Vec<PointStatus>,
    pub timings: BTreeMap<String, f64>,
    /// Artifact path relative to the run directory → hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub errors: Vec<String>,
}
