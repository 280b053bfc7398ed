//! One test per acceptance criterion. Each prints a single
//! `[acceptance] C<n> ...: PASS|FAIL (...)` line to stderr.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use subpop_cli::report::percent;
use subpop_cli::run::{COMPARISON_CSV, COMPARISON_JSON, COMPARISON_TXT, CURVES_CSV, IDENTIFICATION, SWEEP};
use subpop_cli::{render_comparison_text, render_sweep_text, run_end_to_end, RunConfig};
use subpop_core::cohort_sim::{bayes_auc, simulate_cohort, CategoricalSpec, Concept, SimConfig, SubpopSpec};
use subpop_core::data::{stratified_split, ColumnData, ColumnSpec, Dataset, Provenance, RowId, Schema, SplitTag};
use subpop_core::evaluation::{roc_auc, Metric};
use subpop_core::pipeline::{
    identify_underperforming, run_baseline_comparison, run_sweep, AuditKind, AuditRecord, ComparisonRow,
    ComparisonTable, GeneratorChoice, LeakageAudit, Study, SweepConfig, DEFAULT_FRACTIONS,
};
use subpop_core::predict::PredictorConfig;
use subpop_core::resample::{random_undersample, smote_oversample, RusStrategy};
use subpop_core::seed;
use subpop_core::tabgan::{fit_generator, GanConfig, GeneratorModel};

/// Written to the stderr handle directly so the line shows without `--nocapture`.
fn verdict(id: u8, name: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] C{id} {name}: {status} ({detail})");
    assert!(pass, "criterion {id} failed: {detail}");
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs_f64() < limit_s as f64
}

fn sim(seed: u64, subpops: Vec<SubpopSpec>) -> SimConfig {
    SimConfig {
        label_column: "outcome".into(),
        marker_column: "ethnicity".into(),
        n_continuous: 2,
        subpops,
        categorical: vec![CategoricalSpec { levels: 3 }],
        concept: Concept {
            weights: vec![1.5, -1.0],
            bias: 0.0,
        },
        noise_scale: 0.0,
        seed,
    }
}

/// The 500-row toy cohort: two SPs of 250 with distinct marginals.
fn toy_cohort() -> SimConfig {
    SimConfig {
        label_column: "outcome".into(),
        marker_column: "ethnicity".into(),
        n_continuous: 2,
        subpops: vec![
            SubpopSpec {
                categorical_probabilities: vec![vec![0.6, 0.3, 0.1]],
                ..SubpopSpec::new("A", 250, vec![-2.0, 3.0], vec![0.5, 0.7])
            },
            SubpopSpec {
                categorical_probabilities: vec![vec![0.1, 0.3, 0.6]],
                ..SubpopSpec::new("B", 250, vec![2.0, -1.0], vec![0.6, 0.5])
            },
        ],
        categorical: vec![CategoricalSpec { levels: 3 }],
        concept: Concept {
            weights: vec![1.0, -0.5],
            bias: 0.0,
        },
        noise_scale: 0.0,
        seed: 7,
    }
}

fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn c1_roc_auc_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = seed::rng(1);
    let mut worst: f64 = 0.0;
    let mut tied = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=100);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let levels = rng.random_range(1..=n.max(2));
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        if scores.iter().map(|s| s.to_bits()).collect::<HashSet<_>>().len() < n {
            tied += 1;
        }
        worst = worst.max((roc_auc(&labels, &scores).unwrap() - pairwise_auc(&labels, &scores)).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "ROC AUC oracle equivalence",
        worst <= 1e-12 && tied > 0 && within(elapsed, 10),
        format!("max |diff| {worst:.1e}, {tied}/1000 with ties, {:.2}s", elapsed.as_secs_f64()),
    );
}

fn resample_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::continuous("x0"),
        ColumnSpec::continuous("x1"),
        ColumnSpec::categorical("c0"),
        ColumnSpec::label("y"),
        ColumnSpec::population_marker("group"),
    ])
    .unwrap()
}

fn random_groups(rng: &mut seed::Rng) -> Dataset {
    let mut groups = Vec::new();
    for c in 0..rng.random_range(2..5) {
        groups.extend(std::iter::repeat_n(format!("g{c}"), rng.random_range(2..25)));
    }
    let n = groups.len();
    let x0: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(-5.0..5.0))).collect();
    let x1: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(0.0..100.0))).collect();
    let c0: Vec<Option<String>> = (0..n).map(|_| Some(format!("k{}", rng.random_range(0..3)))).collect();
    let y: Vec<Option<String>> = (0..n).map(|_| Some(rng.random_range(0..2).to_string())).collect();
    let g: Vec<Option<String>> = groups.into_iter().map(Some).collect();
    Dataset::new(
        resample_schema(),
        vec![
            ColumnData::Continuous(x0),
            ColumnData::Continuous(x1),
            ColumnData::categorical_from_strings(&c0),
            ColumnData::categorical_from_strings(&y),
            ColumnData::categorical_from_strings(&g),
        ],
        (0..n as u64).map(RowId::Real).collect(),
        Provenance::new("random", SplitTag::Train),
    )
    .unwrap()
}

fn xy(d: &Dataset, r: usize) -> [f64; 2] {
    [d.values(0).unwrap()[r].unwrap(), d.values(1).unwrap()[r].unwrap()]
}

fn on_segment(s: [f64; 2], p: [f64; 2], q: [f64; 2]) -> bool {
    let mut lambda: Option<f64> = None;
    for j in 0..2 {
        let span = q[j] - p[j];
        if span.abs() < 1e-12 {
            if (s[j] - p[j]).abs() > 1e-9 {
                return false;
            }
            continue;
        }
        let l = (s[j] - p[j]) / span;
        if !(-1e-9..=1.0 + 1e-9).contains(&l) || lambda.is_some_and(|prev| (prev - l).abs() > 1e-7) {
            return false;
        }
        lambda = Some(l);
    }
    true
}

/// Every synthetic row lies on a segment from a real same-class parent to one
/// of its k nearest same-class neighbours (globally standardized distance),
/// with the parent's categorical cells.
fn smote_geometry_holds(out: &Dataset, k: usize) -> bool {
    let real: Vec<usize> = (0..out.n_rows()).filter(|&r| out.row_ids()[r].is_real()).collect();
    let mut z: BTreeMap<usize, [f64; 2]> = real.iter().map(|&r| (r, xy(out, r))).collect();
    for j in 0..2 {
        let vals: Vec<f64> = real.iter().map(|&r| xy(out, r)[j]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        for p in z.values_mut() {
            p[j] = (p[j] - mean) / sd;
        }
    }
    (0..out.n_rows()).filter(|&r| !out.row_ids()[r].is_real()).all(|r| {
        let class = out.category(4, r);
        let members: Vec<usize> = real.iter().copied().filter(|&i| out.category(4, i) == class).collect();
        let k_eff = k.min(members.len() - 1);
        members.iter().any(|&p| {
            if out.category(2, p) != out.category(2, r) || out.category(3, p) != out.category(3, r) {
                return false;
            }
            let mut others: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&q| q != p)
                .map(|&q| ((z[&p][0] - z[&q][0]).powi(2) + (z[&p][1] - z[&q][1]).powi(2), q))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0));
            others[..k_eff].iter().any(|&(_, q)| on_segment(xy(out, r), xy(out, p), xy(out, q)))
        })
    })
}

#[test]
fn c2_resampler_contracts() {
    let start = Instant::now();
    let mut rng = seed::rng(2);
    let (mut smote_ok, mut rus_ok) = (0, 0);
    for instance in 0..100u64 {
        let d = random_groups(&mut rng);
        let before = d.category_counts(4).unwrap();

        let (out, _) = smote_oversample(&d, "group", 5, instance).unwrap();
        let majority = *before.values().max().unwrap();
        let counts = out.category_counts(4).unwrap();
        if counts.len() == before.len() && counts.values().all(|&c| c == majority) && smote_geometry_holds(&out, 5) {
            smote_ok += 1;
        }

        let (out, _) = random_undersample(&d, "group", RusStrategy::All, instance).unwrap();
        let minimum = *before.values().min().unwrap();
        let counts = out.category_counts(4).unwrap();
        let input: HashSet<RowId> = d.row_ids().iter().copied().collect();
        let unique: HashSet<RowId> = out.row_ids().iter().copied().collect();
        if counts.len() == before.len()
            && counts.values().all(|&c| c == minimum)
            && unique.len() == out.n_rows()
            && unique.is_subset(&input)
        {
            rus_ok += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "resampler contracts",
        smote_ok == 100 && rus_ok == 100 && within(elapsed, 30),
        format!("SMOTE {smote_ok}/100, RUS {rus_ok}/100, {:.2}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn c3_stratified_split_exactness() {
    let start = Instant::now();
    let mut rng = seed::rng(3);
    let schema = Schema::new(vec![
        ColumnSpec::continuous("x"),
        ColumnSpec::label("y"),
        ColumnSpec::population_marker("group"),
    ])
    .unwrap();
    let mut ok = 0;
    for instance in 0..200u64 {
        let sizes: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(1..60)).collect();
        let strata: Vec<Option<String>> = sizes
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| std::iter::repeat_n(Some(format!("s{s}")), n))
            .collect();
        let n = strata.len();
        let d = Dataset::new(
            schema.clone(),
            vec![
                ColumnData::Continuous((0..n).map(|i| Some(i as f64)).collect()),
                ColumnData::categorical_from_strings(&strata),
                ColumnData::categorical_from_strings(&vec![Some("g".to_string()); n]),
            ],
            (0..n as u64).map(RowId::Real).collect(),
            Provenance::new("random", SplitTag::Whole),
        )
        .unwrap();
        let pair = stratified_split(&d, 0.65, "y", instance).unwrap();
        let train = pair.train.category_counts(1).unwrap();
        let per_stratum = sizes.iter().enumerate().all(|(s, &size)| {
            let got = train.get(&format!("s{s}")).copied().unwrap_or(0) as f64;
            (got - 0.65 * size as f64).abs() <= 1.0
        });
        // singleton strata go to train; the rest share round(0.65 * pooled)
        let singletons = sizes.iter().filter(|&&s| s == 1).count();
        let pooled: usize = sizes.iter().filter(|&&s| s > 1).sum();
        let expected_total = singletons + (0.65 * pooled as f64).round() as usize;
        let ids: HashSet<RowId> = pair.train.row_ids().iter().chain(pair.test.row_ids()).copied().collect();
        if per_stratum
            && pair.train.n_rows() == expected_total
            && pair.train.n_rows() + pair.test.n_rows() == n
            && ids.len() == n
        {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        "stratified split exactness",
        ok == 200 && within(elapsed, 10),
        format!("{ok}/200 datasets exact, {:.2}s", elapsed.as_secs_f64()),
    );
}

const TOY_RUN: &str = r#"
use_case = "toy"
generator = "tabgan"
targets = "all"
metrics = ["roc_auc", "accuracy", "pr_auc"]
[sweep]
fractions = [0.0, 0.5, 1.0, 5.0]
master_seed = 17
[gan]
epochs = 3
[predictor]
n_trees = 50
"#;

#[test]
fn c4_determinism_across_worker_counts() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let artifacts = [IDENTIFICATION, SWEEP, CURVES_CSV, COMPARISON_JSON, COMPARISON_CSV, COMPARISON_TXT, "audit.json"];
    let mut outputs = Vec::new();
    for workers in [1, 4] {
        let mut cfg: RunConfig = toml::from_str(TOY_RUN).unwrap();
        cfg.simulator = Some(toy_cohort());
        cfg.sweep.workers = workers;
        cfg.out = dir.path().join(format!("w{workers}"));
        cfg.normalize().unwrap();
        let summary = run_end_to_end(&cfg).unwrap();
        assert_eq!(summary.targets.len(), 2);
        outputs.push(cfg.out);
    }
    for name in artifacts {
        if fs::read(outputs[0].join(name)).unwrap() != fs::read(outputs[1].join(name)).unwrap() {
            differing.push(name);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        4,
        "determinism",
        differing.is_empty() && within(elapsed, 300),
        format!(
            "{} metric artifacts compared at 1 vs 4 workers, differing {differing:?}, {:.1}s",
            artifacts.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c5_zero_fraction_is_the_vanilla_baseline() {
    let cfg_sim = sim(
        5,
        vec![
            SubpopSpec::new("a", 600, vec![0.0, 0.0], vec![1.0, 1.0]),
            SubpopSpec::new("b", 150, vec![0.5, -0.5], vec![1.0, 1.0]),
            SubpopSpec::new("c", 90, vec![-0.5, 0.5], vec![1.0, 1.0]),
        ],
    );
    let d = simulate_cohort(&cfg_sim).unwrap();
    let cfg = SweepConfig {
        fractions: vec![0.0, 1.0],
        master_seed: 5,
        ..SweepConfig::default()
    };
    let pred = PredictorConfig::default();
    let study = Study::new(&d, &cfg).unwrap();
    let ident = identify_underperforming(&study, &cfg, &pred).unwrap();
    let targets: Vec<String> = study.splits.keys().cloned().collect();
    let run = run_sweep(&study, &targets, &cfg, &GeneratorChoice::Oracle(cfg_sim), &pred).unwrap();
    let table = run_baseline_comparison(&study, "t", &cfg, &pred, Some(&run.result)).unwrap();
    let mut identical = 0;
    for sp in &targets {
        let zero = run.result.point(sp, 0.0).unwrap();
        let ens = table.rows.iter().find(|r| &r.sp == sp).unwrap().ens;
        if zero.synthetic_rows == 0
            && zero.seeds.sp_model == study.sp_model_seed(sp, 0.0)
            && zero.sp_report().is_some()
            && zero.sp_report() == ident.baseline(sp)
            && ens == zero.sp_report().map(|r| r.roc_auc)
        {
            identical += 1;
        }
    }
    verdict(
        5,
        "baseline identity",
        identical == targets.len(),
        format!("{identical}/{} SPs bit-identical to the vanilla ensemble", targets.len()),
    );
}

#[test]
fn c6_oracle_generator_improvement() {
    let start = Instant::now();
    let (mut base, mut aug, mut bayes) = (0.0, 0.0, 0.0);
    for s in 0..10u64 {
        let cfg_sim = sim(
            s,
            vec![
                SubpopSpec::new("majority", 2000, vec![0.0, 0.0], vec![1.0, 1.0]),
                SubpopSpec::new("minority", 80, vec![0.5, 0.5], vec![1.0, 1.0]),
            ],
        );
        let d = simulate_cohort(&cfg_sim).unwrap();
        let cfg = SweepConfig {
            fractions: vec![0.0, 5.0],
            master_seed: s,
            ..SweepConfig::default()
        };
        let study = Study::new(&d, &cfg).unwrap();
        let run = run_sweep(
            &study,
            &["minority".to_string()],
            &cfg,
            &GeneratorChoice::Oracle(cfg_sim.clone()),
            &PredictorConfig::default(),
        )
        .unwrap();
        base += run.result.point("minority", 0.0).unwrap().sp_report().unwrap().roc_auc / 10.0;
        aug += run.result.point("minority", 5.0).unwrap().sp_report().unwrap().roc_auc / 10.0;
        bayes += bayes_auc(&cfg_sim, "minority", 100_000, s).unwrap() / 10.0;
    }
    let elapsed = start.elapsed();
    let (gain, gap) = (aug - base, (bayes - aug).abs());
    verdict(
        6,
        "oracle-generator improvement",
        gain >= 0.02 && gap <= 0.05 && within(elapsed, 300),
        format!(
            "mean AUC 0%: {base:.3}, 500%: {aug:.3}, Bayes {bayes:.3}; gain {gain:.3} >= 0.02, gap {gap:.3} <= 0.05, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn wasserstein_1(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = a.iter().chain(&b).copied().collect();
    grid.sort_by(f64::total_cmp);
    let (mut i, mut j, mut area) = (0, 0, 0.0);
    for w in grid.windows(2) {
        while i < a.len() && a[i] <= w[0] {
            i += 1;
        }
        while j < b.len() && b[j] <= w[0] {
            j += 1;
        }
        area += (i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs() * (w[1] - w[0]);
    }
    area
}

fn total_variation(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let na = a.values().sum::<usize>() as f64;
    let nb = b.values().sum::<usize>() as f64;
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (*a.get(k).unwrap_or(&0) as f64 / na - *b.get(k).unwrap_or(&0) as f64 / nb).abs())
        .sum::<f64>()
        / 2.0
}

#[test]
fn c7_gan_fidelity_smoke() {
    let start = Instant::now();
    let d = simulate_cohort(&toy_cohort()).unwrap();
    let cfg = GanConfig {
        epochs: 30,
        dis_lr: 2e-4,
        seed: 1,
        ..GanConfig::default()
    };
    let model: GeneratorModel<f64> = fit_generator(&d, &cfg).unwrap();
    let finite = model
        .loss_trace
        .iter()
        .all(|r| r.discriminator.is_finite() && r.generator.is_finite());
    let g = model.generate(10_000, 5).unwrap();
    let column = |d: &Dataset, c: usize| -> Vec<f64> { d.values(c).unwrap().iter().map(|v| v.unwrap()).collect() };
    let mut w1 = Vec::new();
    for c in 0..2 {
        let real = column(&d, c);
        let mean = real.iter().sum::<f64>() / real.len() as f64;
        let sd = (real.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / real.len() as f64).sqrt();
        w1.push(wasserstein_1(&real, &column(&g, c)) / sd);
    }
    let tv: Vec<f64> = (2..5)
        .map(|c| total_variation(&d.category_counts(c).unwrap(), &g.category_counts(c).unwrap()))
        .collect();
    let elapsed = start.elapsed();
    verdict(
        7,
        "GAN fidelity smoke",
        finite
            && g.n_rows() == 10_000
            && w1.iter().all(|&w| w <= 0.25)
            && tv.iter().all(|&t| t <= 0.10)
            && within(elapsed, 600),
        format!(
            "normalized W1 {w1:.3?} <= 0.25, TV {tv:.3?} <= 0.10, loss trace finite: {finite}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c8_report_fidelity() {
    let row = |sp: &str, n, v: [f64; 4]| ComparisonRow {
        sp: sp.into(),
        n,
        smote: Some(v[0]),
        rus: Some(v[1]),
        ens: Some(v[2]),
        ens_gan: Some(v[3]),
        selected_fraction: Some(1.0),
        swept: true,
        notes: vec![],
    };
    let table = ComparisonTable {
        use_case: "30 day mortality with Sepsis-3".into(),
        rows: vec![row("Black", 119, [0.745, 0.724, 0.788, 0.812]), row("Asian", 53, [0.767, 0.807, 0.751, 0.903])],
        audit: LeakageAudit::default(),
    };
    let text = render_comparison_text(&table);
    let header: Vec<String> = text
        .lines()
        .nth(1)
        .unwrap()
        .split("  ")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    let asian: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("Asian"))
        .unwrap()
        .split_whitespace()
        .collect();
    let table_ok = header == ["Subpopulation", "n", "SMOTE", "RUS", "Ens.", "Ens. GAN"]
        && asian == ["Asian", "53", "0.767", "0.807", "0.751", "0.903"];

    let cfg_sim = sim(8, vec![SubpopSpec::new("only", 200, vec![0.0, 0.0], vec![1.0, 1.0])]);
    let d = simulate_cohort(&cfg_sim).unwrap();
    let cfg = SweepConfig {
        master_seed: 8,
        ..SweepConfig::default()
    };
    let pred = PredictorConfig {
        n_trees: 20,
        ..PredictorConfig::default()
    };
    let study = Study::new(&d, &cfg).unwrap();
    let run = run_sweep(&study, &["only".to_string()], &cfg, &GeneratorChoice::Oracle(cfg_sim), &pred).unwrap();
    let sweep_text = render_sweep_text(&run.result, Metric::RocAuc);
    let labels: Vec<&str> = sweep_text
        .lines()
        .skip(2)
        .filter(|l| !l.starts_with("gaps"))
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    let expected: Vec<String> = DEFAULT_FRACTIONS.iter().map(|&f| percent(f)).collect();
    let sweep_ok = labels == expected && expected.len() == 20;
    verdict(
        8,
        "report fidelity",
        table_ok && sweep_ok,
        format!(
            "Asian row {asian:?}; sweep report {} rows {}..{}",
            labels.len(),
            labels.first().unwrap_or(&"?"),
            labels.last().unwrap_or(&"?")
        ),
    );
}

#[test]
fn c9_leakage_audit_over_a_full_run() {
    let d = simulate_cohort(&toy_cohort()).unwrap();
    let cfg = SweepConfig {
        fractions: vec![0.0, 0.5, 1.0],
        master_seed: 9,
        workers: 2,
        ..SweepConfig::default()
    };
    let pred = PredictorConfig {
        n_trees: 30,
        ..PredictorConfig::default()
    };
    let gan = GanConfig {
        epochs: 2,
        ..GanConfig::default()
    };
    let study = Study::new(&d, &cfg).unwrap();
    let ident = identify_underperforming(&study, &cfg, &pred).unwrap();
    let targets: Vec<String> = study.splits.keys().cloned().collect();
    let run = run_sweep(&study, &targets, &cfg, &GeneratorChoice::Tabgan(gan), &pred).unwrap();
    let table = run_baseline_comparison(&study, "toy", &cfg, &pred, Some(&run.result)).unwrap();
    let mut audit = ident.audit.clone();
    audit.extend(&run.result.audit);
    audit.extend(&table.audit);

    let models = audit.records.iter().filter(|r| r.kind == AuditKind::Model).count();
    let generators = audit.records.iter().filter(|r| r.kind == AuditKind::Generator).count();
    let n_sp = study.splits.len();
    // identification: full + each SP; sweep: SP and full model per point;
    // comparison: SMOTE, RUS and Ens. per SP
    let expected_models = 1 + n_sp + 2 * run.result.points.len() + 3 * n_sp;

    // independent re-check of what each generator saw
    let all_test: HashSet<RowId> = study.full_test.row_ids().iter().copied().collect();
    let generators_clean = run.sources.iter().all(|(sp, src)| {
        let train: HashSet<RowId> = study.splits[sp].train.row_ids().iter().copied().collect();
        !src.training_rows().is_empty()
            && src.training_rows().iter().all(|r| train.contains(r) && !all_test.contains(r))
    });
    let leaky: Vec<RowId> = study.full_train.row_ids().iter().chain(&study.full_test.row_ids()[..1]).copied().collect();
    let control = AuditRecord::model("control", &leaky, &study.full_test);

    verdict(
        9,
        "leakage audit",
        audit.passed()
            && models == expected_models
            && generators == targets.len()
            && generators_clean
            && !control.passed(),
        format!(
            "{models} model and {generators} generator records, {} failures; planted overlap detected: {}",
            audit.failures().count(),
            !control.passed()
        ),
    );
}
