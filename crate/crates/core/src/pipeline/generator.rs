use serde::{Deserialize, Serialize};

use crate::cohort_sim::{oracle_sample, SimConfig};
use crate::data::{Dataset, Provenance, RowId, SplitTag};
use crate::error::LossRecord;
use crate::tabgan::{fit_generator, GanConfig, GeneratorModel};
use crate::Result;

/// Anything that can produce synthetic rows for one subpopulation.
pub trait SyntheticSource: Send + Sync {
    fn generate(&self, n: usize, seed: u64) -> Result<Dataset>;
    fn schema_fingerprint(&self) -> String;
    /// Row identities the source was fitted on.
    fn training_rows(&self) -> &[RowId];
    fn describe(&self) -> String;

    fn loss_trace(&self) -> &[LossRecord] {
        &[]
    }

    fn as_tabgan(&self) -> Option<&GeneratorModel<f64>> {
        None
    }
}

impl SyntheticSource for GeneratorModel<f64> {
    fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        GeneratorModel::generate(self, n, seed)
    }

    fn schema_fingerprint(&self) -> String {
        self.schema_fingerprint.clone()
    }

    fn training_rows(&self) -> &[RowId] {
        &self.training_rows
    }

    fn describe(&self) -> String {
        format!("tabgan({} epochs, {} training rows)", self.config.epochs, self.training_rows.len())
    }

    fn loss_trace(&self) -> &[LossRecord] {
        &self.loss_trace
    }

    fn as_tabgan(&self) -> Option<&GeneratorModel<f64>> {
        Some(self)
    }
}

/// Samples the simulator's true distribution for one subpopulation; sees no
/// training rows at all.
#[derive(Debug, Clone)]
pub struct OracleGenerator {
    pub config: SimConfig,
    pub pm_value: String,
    reference: Dataset,
}

impl OracleGenerator {
    pub fn new(config: SimConfig, pm_value: impl Into<String>, reference: &Dataset) -> Self {
        Self {
            config,
            pm_value: pm_value.into(),
            reference: Dataset::empty_like(reference, Provenance::new("oracle-reference", SplitTag::Synthetic)),
        }
    }
}

impl SyntheticSource for OracleGenerator {
    fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        oracle_sample(&self.config, &self.pm_value, n, seed)?.align_to(&self.reference)
    }

    fn schema_fingerprint(&self) -> String {
        self.reference.schema().fingerprint()
    }

    fn training_rows(&self) -> &[RowId] {
        &[]
    }

    fn describe(&self) -> String {
        format!("oracle({})", self.pm_value)
    }
}

/// Which generator a run fits per target subpopulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorChoice {
    Tabgan(GanConfig),
    Oracle(SimConfig),
}

impl Default for GeneratorChoice {
    fn default() -> Self {
        GeneratorChoice::Tabgan(GanConfig::default())
    }
}

pub fn fit_source(choice: &GeneratorChoice, sp: &str, train: &Dataset, seed: u64) -> Result<Box<dyn SyntheticSource>> {
    Ok(match choice {
        GeneratorChoice::Tabgan(cfg) => {
            let cfg = GanConfig { seed, ..cfg.clone() };
            Box::new(fit_generator::<f64>(train, &cfg)?)
        }
        GeneratorChoice::Oracle(sim) => Box::new(OracleGenerator::new(sim.clone(), sp, train)),
    })
}
