use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};
use subpop_core::evaluation::{build_curves, write_curves_csv, Metric};
use subpop_core::pipeline::{
    dataset_hash, identify_underperforming, run_baseline_comparison, run_sweep, Assessment, ComparisonTable,
    Identification, LeakageAudit, PointStatus, RunManifest, Study, SweepResult, EXCLUDED_KEY,
};
use subpop_core::seed::derive_seed;
use subpop_core::Error;

use crate::config::{RunConfig, Targets};
use crate::report::{emit_report, render_comparison_csv, render_comparison_text};
use crate::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const IDENTIFICATION: &str = "identification.json";
pub const SWEEP: &str = "sweep.json";
pub const CURVES_CSV: &str = "curves.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_TXT: &str = "comparison.txt";
pub const AUDIT: &str = "audit.json";

/// Writes files under a run directory and remembers their hashes.
pub struct ArtifactWriter {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.hashes.insert(name.to_owned(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("results serialize");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn hashes(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    pub targets: Vec<String>,
    pub sweep: Option<SweepResult>,
    pub comparison: ComparisonTable,
    pub identification: Identification,
    pub audit: LeakageAudit,
}

/// Resolves the configured target list against the identification.
pub fn resolve_targets(targets: &Targets, ident: &Identification) -> CliResult<Vec<String>> {
    Ok(match targets {
        Targets::Keyword(k) if k == "all" => ident
            .subpopulations
            .iter()
            .filter(|(_, a)| matches!(a, Assessment::Assessed { .. }))
            .map(|(k, _)| k.clone())
            .collect(),
        Targets::Keyword(_) => ident.underperforming(),
        Targets::List(list) => {
            for sp in list {
                if !ident.subpopulations.contains_key(sp) {
                    return Err(CliError::Config(format!("target `{sp}` is not a studied subpopulation")));
                }
            }
            list.clone()
        }
    })
}

fn manifest_skeleton(cfg: &RunConfig, study: &Study) -> CliResult<RunManifest> {
    let d = &study.data;
    let marker = d.schema().marker_name();
    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_owned(), cfg.sweep.master_seed);
    for sp in study.splits.keys() {
        seeds.insert(format!("split/{sp}"), derive_seed(study.master_seed, &["split", sp]));
        seeds.insert(format!("generator/{sp}"), study.generator_seed(sp));
    }
    if study.excluded_split.is_some() {
        seeds.insert(
            format!("split/{EXCLUDED_KEY}"),
            derive_seed(study.master_seed, &["split", EXCLUDED_KEY]),
        );
    }
    for key in ["smote-split", "smote", "rus"] {
        seeds.insert(key.to_owned(), derive_seed(study.master_seed, &[key]));
    }
    let mut split_protocols = BTreeMap::new();
    let pct = |f: f64| format!("{:.0}/{:.0}", f * 100.0, (1.0 - f) * 100.0);
    let tf = cfg.sweep.train_fraction;
    split_protocols.insert(
        "ensemble".to_owned(),
        format!("each subpopulation split {} independently, stratified by outcome", pct(tf)),
    );
    split_protocols.insert(
        "full_population".to_owned(),
        "union of the subpopulation splits and the excluded rows' own split".to_owned(),
    );
    split_protocols.insert(
        "smote".to_owned(),
        format!("studied rows split {} stratified by `{marker}`; SMOTE on train with `{marker}` as class", pct(tf)),
    );
    split_protocols.insert(
        "rus".to_owned(),
        format!(
            "random under-sampling (all) of studied rows by `{marker}`, then each subpopulation split {} stratified by outcome",
            pct(tf)
        ),
    );
    Ok(RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        status: "running".to_owned(),
        dataset_source: d.provenance.source.clone(),
        dataset_hash: dataset_hash(d)?,
        dataset_rows: d.n_rows(),
        schema: d.schema().clone(),
        schema_fingerprint: d.schema().fingerprint(),
        configs: serde_json::to_value(cfg).expect("config serializes"),
        split_protocols,
        subpopulation_sizes: study.partition.sizes(),
        targets: Vec::new(),
        seeds,
        points: Vec::new(),
        timings: BTreeMap::new(),
        artifacts: BTreeMap::new(),
        errors: Vec::new(),
    })
}

fn finish_manifest(writer: &mut ArtifactWriter, mut manifest: RunManifest, status: &str) -> CliResult<()> {
    manifest.status = status.to_owned();
    manifest.artifacts = writer.hashes().clone();
    writer.write_json(MANIFEST, &manifest)
}

/// preprocess → partition → identify → sweep → baselines → report.
pub fn run_end_to_end(cfg: &RunConfig) -> CliResult<RunSummary> {
    let mut cfg = cfg.clone();
    cfg.normalize()?;
    let started = Instant::now();
    let data = cfg.dataset()?;
    let study = Study::new(&data, &cfg.sweep)?;
    let mut writer = ArtifactWriter::new(&cfg.out)?;
    let mut manifest = manifest_skeleton(&cfg, &study)?;

    let t = Instant::now();
    let identification = identify_underperforming(&study, &cfg.sweep, &cfg.predictor)?;
    manifest.timings.insert("identify".into(), t.elapsed().as_secs_f64());
    writer.write_json(IDENTIFICATION, &identification)?;
    let targets = resolve_targets(&cfg.targets, &identification)?;
    manifest.targets = targets.clone();
    info!("targets: {targets:?}");

    let mut audit = identification.audit.clone();
    let sweep = if targets.is_empty() {
        info!("no underperforming subpopulations identified; skipping the sweep");
        None
    } else {
        match run_sweep(&study, &targets, &cfg.sweep, &cfg.generator_choice(), &cfg.predictor) {
            Ok(run) => {
                manifest.timings.extend(run.timings.iter().map(|(k, v)| (format!("sweep/{k}"), *v)));
                for (sp, src) in &run.sources {
                    if let Some(model) = src.as_tabgan() {
                        writer.write(
                            &format!("generators/{sp}.spg"),
                            &model.to_bytes()?,
                        )?;
                        let mut trace = Vec::new();
                        model.write_loss_trace(&mut trace).map_err(|e| CliError::io("loss trace", e))?;
                        writer.write(&format!("generators/{sp}_loss.csv"), &trace)?;
                    }
                }
                Some(run.result)
            }
            Err(Error::SweepFailed { failed, total, partial }) => {
                writer.write_json(SWEEP, &partial)?;
                manifest.points = PointStatus::from_sweep(&partial);
                manifest.errors.push(format!("sweep failed at {failed} of {total} points"));
                finish_manifest(&mut writer, manifest, "failed")?;
                return Err(Error::SweepFailed { failed, total, partial }.into());
            }
            Err(e) => {
                manifest.errors.push(e.to_string());
                finish_manifest(&mut writer, manifest, "failed")?;
                return Err(e.into());
            }
        }
    };

    if let Some(s) = &sweep {
        audit.extend(&s.audit);
        manifest.points = PointStatus::from_sweep(s);
        writer.write_json(SWEEP, s)?;
        let curves = build_curves(s)?;
        let mut csv = Vec::new();
        write_curves_csv(&curves, &Metric::ALL, &mut csv)?;
        writer.write(CURVES_CSV, &csv)?;
    }

    let t = Instant::now();
    let comparison = run_baseline_comparison(&study, &cfg.use_case, &cfg.sweep, &cfg.predictor, sweep.as_ref())?;
    manifest.timings.insert("compare".into(), t.elapsed().as_secs_f64());
    audit.extend(&comparison.audit);
    writer.write_json(COMPARISON_JSON, &comparison)?;
    writer.write(COMPARISON_CSV, render_comparison_csv(&comparison).as_bytes())?;
    writer.write(COMPARISON_TXT, render_comparison_text(&comparison).as_bytes())?;
    writer.write_json(AUDIT, &audit)?;

    if !audit.passed() {
        for r in audit.failures() {
            manifest.errors.push(format!("leakage: {r:?}"));
        }
        finish_manifest(&mut writer, manifest, "failed")?;
        return Err(Error::Pipeline("leakage audit failed".into()).into());
    }

    let failed = sweep.as_ref().map_or(0, SweepResult::failed);
    let status = if failed > 0 { "partial" } else { "complete" };
    manifest.timings.insert("total".into(), started.elapsed().as_secs_f64());
    finish_manifest(&mut writer, manifest, status)?;
    emit_report(&cfg.out, &cfg.metrics, cfg.plots)?;
    if failed > 0 {
        warn!("{failed} sweep points failed; see {MANIFEST}");
    }
    Ok(RunSummary {
        out: cfg.out.clone(),
        targets,
        sweep,
        comparison,
        identification,
        audit,
    })
}

/// Problems found re-hashing the artifacts listed in a run's manifest.
pub fn verify_manifest(dir: &Path) -> CliResult<Vec<String>> {
    let manifest: RunManifest = read_json(&dir.join(MANIFEST))?;
    let mut problems = Vec::new();
    for (name, expected) in &manifest.artifacts {
        let path = dir.join(name);
        match fs::read(&path) {
            Ok(bytes) => {
                let actual = hex::encode(Sha256::digest(&bytes));
                if &actual != expected {
                    problems.push(format!("{name}: hash mismatch"));
                }
            }
            Err(_) => problems.push(format!("{name}: missing")),
        }
    }
    Ok(problems)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Results {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
