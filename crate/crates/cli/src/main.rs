use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use subpop_cli::run::{read_json, resolve_targets, ArtifactWriter, COMPARISON_CSV, COMPARISON_JSON, COMPARISON_TXT, CURVES_CSV, IDENTIFICATION, SWEEP};
use subpop_cli::{emit_report, render_comparison_csv, render_comparison_text, render_sweep_text, run_end_to_end, verify_manifest, CliError, CliResult, RunConfig};
use subpop_core::cohort_sim::{simulate_cohort, SimConfig};
use subpop_core::data::{save_dataset, TableFormat};
use subpop_core::evaluation::{build_curves, write_curves_csv, Metric};
use subpop_core::pipeline::{augment_training_set, identify_underperforming, run_baseline_comparison, run_sweep, Study, SweepResult};
use subpop_core::tabgan::{fit_generator, GanConfig, GeneratorModel};

#[derive(Parser)]
#[command(name = "subpop", version, about = "Subpopulation-specific synthetic augmentation for tabular prediction")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config document (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sweep.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (or file, for single-table commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated augmentation fractions, e.g. 0,0.5,5.
    #[arg(long, global = true, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Metric(s) to report; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    metric: Option<Vec<Metric>>,
    /// Emit SVG plots.
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic cohort from a simulator config.
    Simulate,
    /// Drop rows with missing cells and write the cleaned table.
    Preprocess,
    /// Write every subpopulation's train/test split.
    Split,
    /// Report which subpopulations the baseline model serves worst.
    Identify,
    /// Fit a generator on one subpopulation's training split.
    TrainGen {
        /// Subpopulation (population-marker value).
        #[arg(long)]
        sp: String,
    },
    /// Add generated rows to one subpopulation's training split.
    Augment {
        /// Subpopulation (population-marker value).
        #[arg(long)]
        sp: String,
        /// Generator artifact written by train-gen.
        #[arg(long)]
        generator: PathBuf,
        /// Synthetic rows as a ratio of the real training rows.
        #[arg(long)]
        fraction: f64,
    },
    /// Run the augmentation sweep over the target subpopulations.
    Sweep,
    /// Compare SMOTE, RUS, the vanilla ensemble and the best sweep point.
    Compare {
        /// Sweep result to take the ensemble-GAN column from.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Render the report (and plots) from a results directory.
    Report,
    /// Everything: identify, sweep, compare, report.
    Run,
}

fn run_config(common: &Common) -> CliResult<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.sweep.master_seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.sweep.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(f) = &common.fractions {
        cfg.sweep.fractions = f.clone();
    }
    if let Some(m) = &common.metric {
        cfg.metrics = m.clone();
    }
    cfg.plots |= common.plots;
    cfg.normalize()?;
    Ok(cfg)
}

fn out_file(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).map_err(|e| CliError::io(p, e))?;
    }
    Ok(())
}

fn study_for(cfg: &RunConfig) -> CliResult<Study> {
    Ok(Study::new(&cfg.dataset()?, &cfg.sweep)?)
}

fn execute(cli: Cli) -> CliResult<()> {
    let common = cli.common;
    match cli.command {
        Command::Simulate => {
            let path = common
                .config
                .as_ref()
                .ok_or_else(|| CliError::Config("--config <simulator.toml> is required".into()))?;
            let mut sim: SimConfig = subpop_core::config::load_document(path)?;
            if let Some(seed) = common.seed {
                sim.seed = seed;
            }
            let d = simulate_cohort(&sim)?;
            let dir = out_file(&common, "cohort");
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            save_dataset(&d, dir.join("cohort.csv"), &TableFormat::default())?;
            let schema = toml::to_string(d.schema()).map_err(|e| CliError::Config(e.to_string()))?;
            fs::write(dir.join("schema.toml"), schema).map_err(|e| CliError::io(dir.join("schema.toml"), e))?;
            println!("wrote {} rows to {}", d.n_rows(), dir.join("cohort.csv").display());
        }
        Command::Preprocess => {
            let cfg = run_config(&common)?;
            let d = cfg.dataset()?;
            let path = out_file(&common, "preprocessed.csv");
            ensure_parent(&path)?;
            save_dataset(&d, &path, &TableFormat::default())?;
            println!("wrote {} complete rows to {}", d.n_rows(), path.display());
        }
        Command::Split => {
            let cfg = run_config(&common)?;
            let study = study_for(&cfg)?;
            let fmt = TableFormat::default();
            let mut sets = vec![("full".to_owned(), &study.full_train, &study.full_test)];
            for (sp, pair) in &study.splits {
                sets.push((sp.clone(), &pair.train, &pair.test));
            }
            for (name, train, test) in sets {
                let dir = cfg.out.join("splits").join(&name);
                fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                save_dataset(train, dir.join("train.csv"), &fmt)?;
                save_dataset(test, dir.join("test.csv"), &fmt)?;
                println!("{name}: {} train, {} test", train.n_rows(), test.n_rows());
            }
        }
        Command::Identify => {
            let cfg = run_config(&common)?;
            let study = study_for(&cfg)?;
            let ident = identify_underperforming(&study, &cfg.sweep, &cfg.predictor)?;
            let mut w = ArtifactWriter::new(&cfg.out)?;
            w.write_json(IDENTIFICATION, &ident)?;
            println!("full population ROC AUC {:.3}", ident.full_population.roc_auc);
            let flagged = ident.underperforming();
            if flagged.is_empty() {
                println!("no underperforming SPs identified");
            } else {
                println!("underperforming: {}", flagged.join(", "));
            }
        }
        Command::TrainGen { sp } => {
            let cfg = run_config(&common)?;
            let study = study_for(&cfg)?;
            let gan = GanConfig {
                seed: study.generator_seed(&sp),
                ..cfg.gan.clone()
            };
            let model: GeneratorModel<f64> = fit_generator(&study.split(&sp)?.train, &gan)?;
            let path = out_file(&common, &format!("{sp}.spg"));
            ensure_parent(&path)?;
            model.save(&path)?;
            let trace = path.with_extension("loss.csv");
            let file = fs::File::create(&trace).map_err(|e| CliError::io(&trace, e))?;
            model.write_loss_trace(file).map_err(|e| CliError::io(&trace, e))?;
            println!("saved generator for `{sp}` to {}", path.display());
        }
        Command::Augment { sp, generator, fraction } => {
            let cfg = run_config(&common)?;
            let study = study_for(&cfg)?;
            let train = &study.split(&sp)?.train;
            let model = GeneratorModel::<f64>::load_for(&generator, train.schema())?;
            let out = augment_training_set(train, &model, fraction, study.generate_seed(&sp, fraction))?;
            let path = out_file(&common, &format!("{sp}_augmented.csv"));
            ensure_parent(&path)?;
            save_dataset(&out, &path, &TableFormat::default())?;
            println!(
                "wrote {} rows ({} real, {} synthetic) to {}",
                out.n_rows(),
                out.real_rows(),
                out.synthetic_rows(),
                path.display()
            );
        }
        Command::Sweep => {
            let cfg = run_config(&common)?;
            let study = study_for(&cfg)?;
            let ident = identify_underperforming(&study, &cfg.sweep, &cfg.predictor)?;
            let targets = resolve_targets(&cfg.targets, &ident)?;
            let mut w = ArtifactWriter::new(&cfg.out)?;
            w.write_json(IDENTIFICATION, &ident)?;
            if targets.is_empty() {
                println!("no underperforming SPs identified");
                return Ok(());
            }
            let run = run_sweep(&study, &targets, &cfg.sweep, &cfg.generator_choice(), &cfg.predictor)?;
            w.write_json(SWEEP, &run.result)?;
            let mut csv = Vec::new();
            write_curves_csv(&build_curves(&run.result)?, &Metric::ALL, &mut csv)?;
            w.write(CURVES_CSV, &csv)?;
            for &m in &cfg.metrics {
                print!("{}", render_sweep_text(&run.result, m));
            }
        }
        Command::Compare { sweep } => {
            let cfg = run_config(&common)?;
            let study = study_for(&cfg)?;
            let sweep: Option<SweepResult> = match sweep {
                Some(p) => Some(read_json(&p)?),
                None => None,
            };
            let table = run_baseline_comparison(&study, &cfg.use_case, &cfg.sweep, &cfg.predictor, sweep.as_ref())?;
            let mut w = ArtifactWriter::new(&cfg.out)?;
            w.write_json(COMPARISON_JSON, &table)?;
            w.write(COMPARISON_CSV, render_comparison_csv(&table).as_bytes())?;
            let text = render_comparison_text(&table);
            w.write(COMPARISON_TXT, text.as_bytes())?;
            print!("{text}");
        }
        Command::Report => {
            let dir = match (&common.out, &common.config) {
                (Some(out), _) => out.clone(),
                (None, Some(_)) => run_config(&common)?.out,
                (None, None) => return Err(CliError::Config("report needs --out <results dir> or --config".into())),
            };
            for problem in verify_manifest(&dir)? {
                log::warn!("{problem}");
            }
            let metrics = common.metric.clone().unwrap_or_else(|| vec![Metric::RocAuc]);
            let path = emit_report(&dir, &metrics, common.plots)?;
            print!("{}", fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?);
        }
        Command::Run => {
            let cfg = run_config(&common)?;
            let summary = run_end_to_end(&cfg)?;
            info!("results in {}", summary.out.display());
            print!("{}", render_comparison_text(&summary.comparison));
            if summary.targets.is_empty() {
                println!("no underperforming SPs identified");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
