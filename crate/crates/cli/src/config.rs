use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subpop_core::cohort_sim::{simulate_cohort, SimConfig};
use subpop_core::data::{load_dataset, preprocess, Dataset, Schema, TableFormat};
use subpop_core::evaluation::Metric;
use subpop_core::pipeline::{GeneratorChoice, SweepConfig};
use subpop_core::predict::PredictorConfig;
use subpop_core::tabgan::GanConfig;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub schema: PathBuf,
    #[serde(default, flatten)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Tabgan,
    /// Samples the simulator's true distribution; needs a `[simulator]` table.
    Oracle,
}

/// `"auto"` (the underperforming ones), `"all"`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Targets {
    Keyword(String),
    List(Vec<String>),
}

impl Default for Targets {
    fn default() -> Self {
        Targets::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub use_case: String,
    pub data: Option<DataSource>,
    pub simulator: Option<SimConfig>,
    pub excluded_pms: BTreeSet<String>,
    pub targets: Targets,
    pub generator: GeneratorKind,
    pub sweep: SweepConfig,
    pub gan: GanConfig,
    pub predictor: PredictorConfig,
    pub out: PathBuf,
    pub metrics: Vec<Metric>,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            use_case: "study".into(),
            data: None,
            simulator: None,
            excluded_pms: BTreeSet::new(),
            targets: Targets::default(),
            generator: GeneratorKind::default(),
            sweep: SweepConfig::default(),
            gan: GanConfig::default(),
            predictor: PredictorConfig::default(),
            out: PathBuf::from("results"),
            metrics: vec![Metric::RocAuc],
            plots: false,
        }
    }
}

impl RunConfig {
    /// Reads a config document; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let mut cfg: RunConfig = subpop_core::config::load_document(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = &mut cfg.data {
            d.path = base.join(&d.path);
            d.schema = base.join(&d.schema);
        }
        cfg.out = base.join(&cfg.out);
        Ok(cfg)
    }

    /// Folds the top-level exclusions into the sweep config and checks every
    /// nested config.
    pub fn normalize(&mut self) -> CliResult<()> {
        self.sweep.excluded_pms.extend(self.excluded_pms.iter().cloned());
        self.excluded_pms = self.sweep.excluded_pms.clone();
        self.sweep.validate()?;
        self.gan.validate()?;
        self.predictor.validate()?;
        match (&self.data, &self.simulator) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either [data] or [simulator], not both".into())),
            (None, None) => return Err(CliError::Config("config needs a [data] or [simulator] table".into())),
            _ => {}
        }
        if self.generator == GeneratorKind::Oracle && self.simulator.is_none() {
            return Err(CliError::Config("the oracle generator needs a [simulator] table".into()));
        }
        if let Targets::Keyword(k) = &self.targets {
            if k != "auto" && k != "all" {
                return Err(CliError::Config(format!("targets must be \"auto\", \"all\" or a list, got `{k}`")));
            }
        }
        if self.metrics.is_empty() {
            self.metrics.push(Metric::RocAuc);
        }
        Ok(())
    }

    pub fn generator_choice(&self) -> GeneratorChoice {
        match (self.generator, &self.simulator) {
            (GeneratorKind::Oracle, Some(sim)) => GeneratorChoice::Oracle(sim.clone()),
            _ => GeneratorChoice::Tabgan(self.gan.clone()),
        }
    }

    /// The preprocessed input table.
    pub fn dataset(&self) -> CliResult<Dataset> {
        let raw = match (&self.data, &self.simulator) {
            (Some(src), _) => {
                let schema = Schema::from_path(&src.schema)?;
                load_dataset(&src.path, &schema, &src.format)?
            }
            (None, Some(sim)) => simulate_cohort(sim)?,
            (None, None) => return Err(CliError::Config("no data source configured".into())),
        };
        Ok(preprocess(&raw)?)
    }
}
