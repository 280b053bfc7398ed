use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use subpop_core::evaluation::{Metric, MetricReport};
use subpop_core::pipeline::{Assessment, ComparisonTable, Identification, PointOutcome, RunManifest, SweepResult};

use crate::plots::{plot_curve, plot_sizes};
use crate::run::{read_json, COMPARISON_JSON, IDENTIFICATION, MANIFEST, SWEEP};
use crate::{CliError, CliResult};

pub const REPORT: &str = "report.txt";

/// `0.05` → `5%`, `1.5` → `150%`, `0.125` → `12.5%`.
pub fn percent(fraction: f64) -> String {
    let p = (fraction * 10_000.0).round() / 100.0;
    if p.fract() == 0.0 {
        format!("{p:.0}%")
    } else {
        format!("{p}%")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_owned(), |v| format!("{v:.3}"))
}

/// Fixed-width table: subpopulation, n, SMOTE, RUS, Ens., Ens. GAN.
pub fn render_comparison_text(table: &ComparisonTable) -> String {
    let width = table.rows.iter().map(|r| r.sp.len()).max().unwrap_or(0).max("Subpopulation".len());
    let mut out = String::new();
    writeln!(out, "Use case: {} (ROC AUC)", table.use_case).unwrap();
    writeln!(
        out,
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>8}",
        "Subpopulation", "n", "SMOTE", "RUS", "Ens.", "Ens. GAN"
    )
    .unwrap();
    for r in &table.rows {
        writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>8}",
            r.sp,
            r.n,
            cell(r.smote),
            cell(r.rus),
            cell(r.ens),
            cell(r.ens_gan)
        )
        .unwrap();
    }
    let selected: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.swept)
        .map(|r| format!("{} {}", r.sp, r.selected_fraction.map_or("--".into(), percent)))
        .collect();
    if !selected.is_empty() {
        writeln!(out, "Ens. GAN synthetic amount: {}", selected.join(", ")).unwrap();
    }
    for r in &table.rows {
        for note in &r.notes {
            writeln!(out, "note ({}): {note}", r.sp).unwrap();
        }
    }
    out
}

pub fn render_comparison_csv(table: &ComparisonTable) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("use_case,subpopulation,n,smote,rus,ens,ens_gan,selected_fraction\n");
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            table.use_case,
            r.sp,
            r.n,
            opt(r.smote),
            opt(r.rus),
            opt(r.ens),
            opt(r.ens_gan),
            opt(r.selected_fraction)
        )
        .unwrap();
    }
    out
}

fn pick(report: &MetricReport, metric: Metric) -> Option<f64> {
    report.get(metric)
}

/// One row per swept fraction; per target, the subpopulation model and the
/// full-population model (on the full test split).
pub fn render_sweep_text(sweep: &SweepResult, metric: Metric) -> String {
    let mut out = String::new();
    writeln!(out, "Sweep ({metric}); columns per subpopulation: SP model / full population").unwrap();
    let mut header = format!("{:>8}", "added");
    for sp in &sweep.targets {
        write!(header, "  {:>17}", format!("{sp} SP/full")).unwrap();
    }
    writeln!(out, "{header}").unwrap();
    for &f in &sweep.fractions {
        let mut line = format!("{:>8}", percent(f));
        for sp in &sweep.targets {
            let text = match sweep.point(sp, f).map(|p| &p.outcome) {
                Some(PointOutcome::Completed { sp_model, full_model, .. }) => {
                    format!("{} / {}", cell(pick(sp_model, metric)), cell(pick(full_model, metric)))
                }
                _ => "-- / --".to_owned(),
            };
            write!(line, "  {text:>17}").unwrap();
        }
        writeln!(out, "{line}").unwrap();
    }
    let gaps: Vec<String> = sweep
        .points
        .iter()
        .filter_map(|p| match &p.outcome {
            PointOutcome::Failed { stage, .. } => Some(format!("{} at {} ({stage})", p.sp, percent(p.fraction))),
            PointOutcome::Completed { .. } => None,
        })
        .collect();
    if !gaps.is_empty() {
        writeln!(out, "gaps: {}", gaps.join(", ")).unwrap();
    }
    out
}

fn render_identification(ident: &Identification) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Full-population baseline ROC AUC: {:.3} (margin {})",
        ident.full_population.roc_auc, ident.margin
    )
    .unwrap();
    for (sp, a) in &ident.subpopulations {
        match a {
            Assessment::Assessed {
                baseline,
                underperforming,
            } => writeln!(
                out,
                "  {sp}: baseline ROC AUC {:.3}{}",
                baseline.roc_auc,
                if *underperforming { "  (underperforming)" } else { "" }
            )
            .unwrap(),
            Assessment::Unassessable { reason } => writeln!(out, "  {sp}: unassessable ({reason})").unwrap(),
        }
    }
    out
}

/// Writes `report.txt` (and plots when asked) from a results directory
/// alone; nothing is recomputed.
pub fn emit_report(dir: &Path, metrics: &[Metric], plots: bool) -> CliResult<PathBuf> {
    let manifest: RunManifest = read_json(&dir.join(MANIFEST))?;
    let ident: Identification = read_json(&dir.join(IDENTIFICATION))?;
    let sweep_path = dir.join(SWEEP);
    let sweep: Option<SweepResult> = if sweep_path.exists() { Some(read_json(&sweep_path)?) } else { None };
    let comparison_path = dir.join(COMPARISON_JSON);
    let comparison: Option<ComparisonTable> =
        if comparison_path.exists() { Some(read_json(&comparison_path)?) } else { None };
    let metrics = if metrics.is_empty() { &[Metric::RocAuc][..] } else { metrics };

    let mut out = String::new();
    writeln!(out, "Run status: {}", manifest.status).unwrap();
    writeln!(out, "Dataset: {} ({} rows, sha256 {})", manifest.dataset_source, manifest.dataset_rows, manifest.dataset_hash).unwrap();
    let mut sizes: Vec<(&String, &usize)> = manifest.subpopulation_sizes.iter().collect();
    sizes.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    writeln!(out, "Subpopulation sizes: {}", sizes.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ")).unwrap();
    writeln!(out).unwrap();
    out.push_str(&render_identification(&ident));
    writeln!(out).unwrap();
    if manifest.targets.is_empty() {
        writeln!(out, "no underperforming SPs identified").unwrap();
    } else {
        writeln!(out, "Targets: {}", manifest.targets.join(", ")).unwrap();
    }
    if let Some(s) = &sweep {
        for &m in metrics {
            writeln!(out).unwrap();
            out.push_str(&render_sweep_text(s, m));
        }
    }
    if let Some(c) = &comparison {
        writeln!(out).unwrap();
        out.push_str(&render_comparison_text(c));
    } else {
        writeln!(out, "\ncomparison table missing (run incomplete)").unwrap();
    }
    for e in &manifest.errors {
        writeln!(out, "error: {e}").unwrap();
    }
    let path = dir.join(REPORT);
    fs::write(&path, &out).map_err(|e| CliError::io(&path, e))?;

    if plots {
        let plot_dir = dir.join("plots");
        fs::create_dir_all(&plot_dir).map_err(|e| CliError::io(&plot_dir, e))?;
        let svg = plot_sizes(&manifest.subpopulation_sizes);
        let p = plot_dir.join("sp_sizes.svg");
        fs::write(&p, svg).map_err(|e| CliError::io(&p, e))?;
        if let Some(s) = &sweep {
            for sp in &s.targets {
                for &m in metrics {
                    let p = plot_dir.join(format!("curve_{}_{m}.svg", file_stem(sp)));
                    fs::write(&p, plot_curve(s, sp, m)).map_err(|e| CliError::io(&p, e))?;
                }
            }
        }
    }
    Ok(path)
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}
