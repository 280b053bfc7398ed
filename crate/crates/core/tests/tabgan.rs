use std::collections::BTreeMap;

use subpop_core::cohort_sim::{simulate_cohort, CategoricalSpec, Concept, SimConfig, SubpopSpec};
use subpop_core::data::{Dataset, Provenance, SplitTag};
use subpop_core::tabgan::{fit_generator, GanConfig, GeneratorModel};
use subpop_core::Error;

fn toy_config(size: usize) -> SimConfig {
    SimConfig {
        label_column: "outcome".into(),
        marker_column: "ethnicity".into(),
        n_continuous: 2,
        subpops: vec![
            SubpopSpec {
                categorical_probabilities: vec![vec![0.6, 0.3, 0.1]],
                ..SubpopSpec::new("A", size, vec![-2.0, 3.0], vec![0.5, 0.7])
            },
            SubpopSpec {
                categorical_probabilities: vec![vec![0.1, 0.3, 0.6]],
                ..SubpopSpec::new("B", size, vec![2.0, -1.0], vec![0.6, 0.5])
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

fn small_gan(seed: u64) -> GanConfig {
    GanConfig {
        epochs: 2,
        latent_dim: 16,
        hidden: vec![32, 32],
        mixture_modes: 4,
        seed,
        ..GanConfig::default()
    }
}

fn continuous(d: &Dataset, col: usize) -> Vec<f64> {
    d.values(col).unwrap().iter().map(|v| v.unwrap()).collect()
}

/// Exact 1-Wasserstein distance between two empirical distributions.
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
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let pa = *a.get(k).unwrap_or(&0) as f64 / na as f64;
            let pb = *b.get(k).unwrap_or(&0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum::<f64>()
        / 2.0
}

#[test]
fn wasserstein_oracle_on_known_shift() {
    let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 2.5).collect();
    assert!((wasserstein_1(&a, &b) - 2.5).abs() < 1e-12);
}

#[test]
fn toy_cohort_fidelity() {
    let d = simulate_cohort(&toy_config(250)).unwrap();
    assert_eq!(d.n_rows(), 500);
    let cfg = GanConfig {
        epochs: 30,
        dis_lr: 2e-4,
        seed: 1,
        ..GanConfig::default()
    };
    let model: GeneratorModel<f64> = fit_generator(&d, &cfg).unwrap();
    assert!(model
        .loss_trace
        .iter()
        .all(|r| r.discriminator.is_finite() && r.generator.is_finite()));
    let g = model.generate(10_000, 5).unwrap();
    assert_eq!(g.n_rows(), 10_000);
    assert!(!g.has_missing());
    for col in 0..2 {
        let real = continuous(&d, col);
        let mean = real.iter().sum::<f64>() / real.len() as f64;
        let sd = (real.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / real.len() as f64).sqrt();
        let w = wasserstein_1(&real, &continuous(&g, col)) / sd;
        assert!(w <= 0.25, "column {col}: normalized W1 {w:.3}");
    }
    for col in 2..5 {
        let tv = total_variation(&d.category_counts(col).unwrap(), &g.category_counts(col).unwrap());
        assert!(tv <= 0.10, "column {col}: TV {tv:.3}");
    }
}

#[test]
fn deterministic_given_seed() {
    let d = simulate_cohort(&toy_config(60)).unwrap();
    let a: GeneratorModel<f64> = fit_generator(&d, &small_gan(3)).unwrap();
    let b: GeneratorModel<f64> = fit_generator(&d, &small_gan(3)).unwrap();
    assert_eq!(a, b);
    let ga = a.generate(200, 9).unwrap();
    let gb = b.generate(200, 9).unwrap();
    assert_eq!(ga.columns(), gb.columns());
    let c: GeneratorModel<f64> = fit_generator(&d, &small_gan(4)).unwrap();
    assert_ne!(a.generator, c.generator);
}

#[test]
fn save_load_roundtrip_is_bit_identical() {
    let d = simulate_cohort(&toy_config(60)).unwrap();
    let model: GeneratorModel<f64> = fit_generator(&d, &small_gan(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.spg");
    model.save(&path).unwrap();
    let loaded = GeneratorModel::<f64>::load_for(&path, d.schema()).unwrap();
    let before = model.generate(100, 42).unwrap();
    let after = loaded.generate(100, 42).unwrap();
    assert_eq!(before.columns(), after.columns());
    assert_eq!(before.row_ids(), after.row_ids());
}

#[test]
fn truncated_artifact_is_an_error() {
    let d = simulate_cohort(&toy_config(60)).unwrap();
    let model: GeneratorModel<f64> = fit_generator(&d, &small_gan(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.spg");
    model.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(GeneratorModel::<f64>::load(&path), Err(Error::Artifact(_))));
}

#[test]
fn schema_fingerprint_mismatch_is_an_error() {
    let d = simulate_cohort(&toy_config(60)).unwrap();
    let model: GeneratorModel<f64> = fit_generator(&d, &small_gan(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.spg");
    model.save(&path).unwrap();
    let other = SimConfig {
        n_continuous: 3,
        concept: Concept {
            weights: vec![1.0, 0.0, 0.0],
            bias: 0.0,
        },
        subpops: vec![SubpopSpec::new("A", 10, vec![0.0; 3], vec![1.0; 3])],
        ..toy_config(10)
    };
    assert!(matches!(
        GeneratorModel::<f64>::load_for(&path, &other.schema()),
        Err(Error::Artifact(_))
    ));
}

#[test]
fn constant_categorical_is_reproduced() {
    let cfg = SimConfig {
        subpops: vec![SubpopSpec {
            categorical_probabilities: vec![vec![0.0, 1.0, 0.0]],
            ..SubpopSpec::new("A", 80, vec![0.0, 1.0], vec![1.0, 1.0])
        }],
        ..toy_config(80)
    };
    let d = simulate_cohort(&cfg).unwrap();
    let model: GeneratorModel<f64> = fit_generator(&d, &small_gan(2)).unwrap();
    let g = model.generate(500, 1).unwrap();
    assert_eq!(g.category_counts(2).unwrap().keys().collect::<Vec<_>>(), vec!["L1"]);
    assert_eq!(g.category_counts(4).unwrap().keys().collect::<Vec<_>>(), vec!["A"]);
}

#[test]
fn zero_rows_gives_an_empty_dataset_with_the_schema() {
    let d = simulate_cohort(&toy_config(40)).unwrap();
    let model: GeneratorModel<f64> = fit_generator(&d, &small_gan(2)).unwrap();
    let g = model.generate(0, 1).unwrap();
    assert_eq!(g.n_rows(), 0);
    assert_eq!(g.schema(), d.schema());
}

#[test]
fn generated_categories_stay_within_the_training_domain() {
    let d = simulate_cohort(&toy_config(100)).unwrap();
    // keep only two of the three levels; the level table still lists all three
    let rows: Vec<usize> = (0..d.n_rows()).filter(|&r| d.category(2, r) != Some("L2")).collect();
    let train = d.select(&rows).with_provenance(Provenance::new("subset", SplitTag::Train));
    assert_eq!(train.levels(2).unwrap().len(), 3);
    let model: GeneratorModel<f64> = fit_generator(&train, &small_gan(5)).unwrap();
    let g = model.generate(10_000, 3).unwrap();
    assert!(!g.has_missing());
    for col in [2, 3, 4] {
        let seen = train.category_counts(col).unwrap();
        for level in g.category_counts(col).unwrap().keys() {
            assert!(seen.contains_key(level), "column {col}: `{level}` never seen in training");
        }
    }
}

#[test]
fn test_rows_are_refused_and_large_batches_clamped() {
    let d = simulate_cohort(&toy_config(20)).unwrap();
    let test = d.clone().with_provenance(Provenance::new("held out", SplitTag::Test));
    assert!(matches!(fit_generator::<f64>(&test, &small_gan(1)), Err(Error::Training(_))));
    let cfg = GanConfig {
        batch_size: 500,
        ..small_gan(1)
    };
    let model: GeneratorModel<f64> = fit_generator(&d, &cfg).unwrap();
    assert_eq!(model.batch_size, d.n_rows());
    assert_eq!(model.generate(95, 0).unwrap().n_rows(), 95);
}
