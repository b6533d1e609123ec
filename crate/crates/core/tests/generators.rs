mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use synthlab_core::generators::*;
use synthlab_core::metrics::{resemblance_report, wasserstein_1d};
use synthlab_core::numeric::seeded;
use synthlab_core::tabular::{Cell, ColumnData, ColumnKind, ColumnSpec, Dataset, Schema};
use synthlab_core::Error;

use common::gan_toy;

fn small_config(iterations: usize) -> CtganConfig {
    CtganConfig {
        iterations,
        batch_size: 100,
        noise_dim: 32,
        generator_hidden: vec![128, 128],
        critic_hidden: vec![128, 128],
        ..Default::default()
    }
}

fn categorical_only(counts: &[usize]) -> Dataset {
    let names: Vec<String> = (0..counts.len()).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    let schema = Schema::new(vec![ColumnSpec::categorical("c", names)]).unwrap();
    let cells: Vec<Option<usize>> = counts.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(Some(k), n)).collect();
    Dataset::new(schema, vec![ColumnData::Categorical(cells)]).unwrap()
}

fn is_schema_valid(ds: &Dataset, schema: &Schema) {
    assert_eq!(ds.schema(), schema);
    assert!(!ds.has_missing());
    for c in 0..ds.n_cols() {
        if let ColumnData::Categorical(v) = ds.column(c) {
            let k = schema.column(c).categories.len();
            assert!(v.iter().all(|x| x.is_some_and(|x| x < k)));
        }
    }
}

// continuous-only toy and the labelled toy, each trained once per test binary
fn continuous_model() -> &'static (Dataset, CtganModel) {
    static M: OnceLock<(Dataset, CtganModel)> = OnceLock::new();
    M.get_or_init(|| {
        let ds = gan_toy(1000, 41).drop_column(2).unwrap();
        let model = ctgan_fit(&ds, &small_config(800), 7).unwrap();
        (ds, model)
    })
}

fn labelled_model() -> &'static (Dataset, CtganModel) {
    static M: OnceLock<(Dataset, CtganModel)> = OnceLock::new();
    M.get_or_init(|| {
        let ds = gan_toy(1000, 42);
        let model = ctgan_fit(&ds, &small_config(800), 8).unwrap();
        (ds, model)
    })
}

#[test]
fn bimodal_column_recovers_both_modes() {
    let mut rng = seeded(3);
    let left = Normal::new(-3.0, 0.5).unwrap();
    let right = Normal::new(3.0, 0.5).unwrap();
    let values: Vec<f64> = (0..1000)
        .map(|i| if i % 2 == 0 { left.sample(&mut rng) } else { right.sample(&mut rng) })
        .collect();
    let norm = fit_mode_normalizer(&values, 5, 11).unwrap();
    assert_eq!(norm.n_modes(), 2);
    let mut means: Vec<f64> = (0..2).map(|m| norm.mean(m)).collect();
    means.sort_by(f64::total_cmp);
    assert!((means[0] + 3.0).abs() < 0.1, "{means:?}");
    assert!((means[1] - 3.0).abs() < 0.1, "{means:?}");
}

#[test]
fn unimodal_column_usually_gets_one_mode() {
    let dist = Normal::new(10.0, 2.0).unwrap();
    let single = (0..20u64)
        .filter(|&seed| {
            let mut rng = seeded(100 + seed);
            let values: Vec<f64> = (0..500).map(|_| dist.sample(&mut rng)).collect();
            fit_mode_normalizer(&values, 5, seed).unwrap().n_modes() == 1
        })
        .count();
    assert!(single >= 18, "{single}/20 fits chose one mode");
}

#[test]
fn mode_normalisation_round_trips() {
    let mut rng = seeded(9);
    let values: Vec<f64> = (0..400).map(|i| if i % 3 == 0 { rng.random_range(-5.0..-1.0) } else { rng.random_range(2.0..8.0) }).collect();
    let norm = fit_mode_normalizer(&values, 5, 1).unwrap();
    for &v in &values {
        let (alpha, mode) = norm.normalize(v, &mut rng).unwrap();
        assert!((norm.inverse(alpha, mode) - v).abs() < 1e-9);
    }
}

#[test]
fn condition_sampling_probabilities() {
    let cond = CondSampler::fit(&categorical_only(&[99, 1])).unwrap();
    let p = cond.blocks[0].log_frequency_probs();
    let expected = 100f64.ln() / (100f64.ln() + 2f64.ln());
    assert!((p[0] - expected).abs() < 1e-12);
    assert!((p[0] - 0.869).abs() < 5e-4);

    let even = CondSampler::fit(&categorical_only(&[50, 50])).unwrap();
    assert_eq!(even.blocks[0].log_frequency_probs(), vec![0.5, 0.5]);

    let continuous = gan_toy(50, 1).drop_column(2).unwrap();
    let none = CondSampler::fit(&continuous).unwrap();
    assert!(none.is_unconditional());
    assert_eq!(none.width, 0);
    assert!(none.sample_training(&mut seeded(0)).is_none());
}

#[test]
fn categorical_frequencies_are_reproduced() {
    let ds = categorical_only(&[800, 200]);
    let config = CtganConfig { iterations: 2000, ..small_config(0) };
    let model = ctgan_fit(&ds, &config, 5).unwrap();
    let syn = model.sample(4000, 6).unwrap();
    is_schema_valid(&syn, ds.schema());
    let freq_a = syn.category_counts(0)[0] as f64 / 4000.0;
    assert!((freq_a - 0.8).abs() <= 0.08, "{freq_a}");
}

#[test]
fn two_gaussian_columns_have_small_scaled_wd() {
    let (ds, model) = continuous_model();
    let syn = model.sample(ds.n_rows(), 1).unwrap();
    is_schema_valid(&syn, ds.schema());
    for c in 0..2 {
        let real = ds.continuous_values(c);
        let range = real.iter().copied().fold(f64::NEG_INFINITY, f64::max) - real.iter().copied().fold(f64::INFINITY, f64::min);
        let wd = wasserstein_1d(&real, &syn.continuous_values(c)).unwrap() / range;
        assert!(wd < 0.1, "column {c}: scaled wd {wd}");
    }
}

#[test]
fn labelled_toy_resembles_real_data() {
    let (ds, model) = labelled_model();
    let syn = model.sample(ds.n_rows(), 2).unwrap();
    is_schema_valid(&syn, ds.schema());
    let report = resemblance_report(ds, &syn).unwrap();
    assert!(report.mean_wd_scaled.unwrap() < 0.1, "{report:?}");
    let jsd = report.categorical[0].jsd;
    assert!(jsd < 0.05, "{jsd}");
}

#[test]
fn conditioned_samples_hold_the_condition() {
    let (_, model) = labelled_model();
    for (cat, label) in ["neg", "pos"].iter().enumerate() {
        let syn = model.sample_conditioned(10_000, "label", label, 3).unwrap();
        let hits = syn.category_counts(2)[cat];
        assert!(hits as f64 >= 0.95 * 10_000.0, "{label}: {hits}/10000");
    }
    assert!(model.sample_conditioned(10, "label", "maybe", 3).is_err());
    assert!(model.sample_conditioned(10, "x1", "neg", 3).is_err());
}

#[test]
fn fitting_and_sampling_are_deterministic() {
    let ds = gan_toy(200, 3);
    let cfg = CtganConfig { iterations: 15, ..small_config(0) };
    let a = ctgan_fit(&ds, &cfg, 99).unwrap();
    let b = ctgan_fit(&ds, &cfg, 99).unwrap();
    assert_eq!(a, b);
    let c = ctgan_fit(&ds, &cfg, 100).unwrap();
    assert_ne!(a.generator, c.generator);

    let s1 = a.sample(150, 4).unwrap();
    assert_eq!(s1, ctgan_sample(&b, 150, 4).unwrap());
    assert_ne!(s1, a.sample(150, 5).unwrap());
    assert_eq!(a.training_log.len(), 15);
}

#[test]
fn saved_model_loads_identically() {
    let ds = gan_toy(200, 4);
    let cfg = CtganConfig { iterations: 10, ..small_config(0) };
    let model = ctgan_fit(&ds, &cfg, 1).unwrap();
    let mut buf = Vec::new();
    model.save(&mut buf).unwrap();
    let loaded = CtganModel::load(buf.as_slice()).unwrap();
    assert_eq!(loaded.generator, model.generator);
    assert_eq!(loaded.sample(300, 2).unwrap(), model.sample(300, 2).unwrap());

    let text = String::from_utf8(buf).unwrap().replace(&format!("\"version\":{MODEL_VERSION}"), "\"version\":999");
    assert!(CtganModel::load(text.as_bytes()).is_err());
    assert!(CtganModel::load(&b"{}"[..]).is_err());
}

#[test]
fn sample_size_matches_request() {
    let ds = gan_toy(395, 5);
    let model = ctgan_fit(&ds, &CtganConfig { iterations: 3, ..small_config(0) }, 0).unwrap();
    let syn = model.sample(395, 0).unwrap();
    assert_eq!((syn.n_rows(), syn.n_cols()), (395, 3));
    assert!(model.sample(0, 0).is_err());
}

#[test]
fn invalid_configs_and_data_are_rejected() {
    let ds = gan_toy(50, 6);
    assert!(ctgan_fit(&ds, &CtganConfig { iterations: 0, ..small_config(0) }, 0).is_err());
    assert!(ctgan_fit(&ds, &CtganConfig { batch_size: 7, ..small_config(1) }, 0).is_err());
    assert!(ctgan_fit(&Dataset::empty(ds.schema().clone()), &small_config(1), 0).is_err());
}

#[test]
fn bootstrap_rows_come_from_train() {
    let ds = gan_toy(100, 7);
    let syn = baseline_fit_sample(BaselineKind::Bootstrap, &ds, 250, 3).unwrap();
    assert_eq!(syn.n_rows(), 250);
    let originals: Vec<Vec<Cell>> = (0..ds.n_rows()).map(|i| ds.row(i)).collect();
    for i in 0..syn.n_rows() {
        assert!(originals.contains(&syn.row(i)));
    }
    assert!(baseline_fit_sample(BaselineKind::Bootstrap, &ds, 0, 3).is_err());
}

#[test]
fn independence_breaks_column_dependence() {
    // col2 is an exact copy of col1, so independent draws agree with
    // probability sum(p_i^2)
    let counts = [500usize, 300, 200];
    let schema = Schema::new(vec![
        ColumnSpec::categorical("a", ["x", "y", "z"]),
        ColumnSpec::categorical("b", ["x", "y", "z"]),
    ])
    .unwrap();
    let col: Vec<Option<usize>> = counts.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(Some(k), n)).collect();
    let ds = Dataset::new(schema, vec![ColumnData::Categorical(col.clone()), ColumnData::Categorical(col)]).unwrap();
    let syn = baseline_fit_sample(BaselineKind::Independence, &ds, 20_000, 1).unwrap();
    let agree = (0..syn.n_rows()).filter(|&i| syn.cell(i, 0) == syn.cell(i, 1)).count() as f64 / 20_000.0;
    let expected: f64 = counts.iter().map(|&c| (c as f64 / 1000.0).powi(2)).sum();
    assert!((agree - expected).abs() < 0.015, "{agree} vs {expected}");
}

#[test]
fn independence_ignores_missing_cells() {
    let schema = Schema::new(vec![ColumnSpec::continuous("v")]).unwrap();
    let ds = Dataset::new(schema, vec![ColumnData::Continuous(vec![Some(1.0), None, Some(2.0)])]).unwrap();
    let syn = baseline_fit_sample(BaselineKind::Independence, &ds, 100, 0).unwrap();
    assert!(!syn.has_missing());
    assert!(syn.continuous_values(0).iter().all(|v| *v == 1.0 || *v == 2.0));
}

fn external_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::continuous("age"),
        ColumnSpec::categorical("sex", ["F", "M"]),
        ColumnSpec::categorical("grade", ["low", "high"]).as_target(),
    ])
    .unwrap()
}

#[test]
fn external_csv_is_tagged() {
    let text = "# generator: DialoGPT\nage,sex,grade\n17,F,low\n18,M,high\n";
    let ext = load_external_synthetic(text.as_bytes(), &external_schema(), None).unwrap();
    assert_eq!(ext.generator, "external:dialogpt");
    assert_eq!(ext.dataset.n_rows(), 2);
    let flagged = load_external_synthetic(text.as_bytes(), &external_schema(), Some("GReaT")).unwrap();
    assert_eq!(flagged.generator, "external:great");
    let bare = load_external_synthetic("age,sex,grade\n17,F,low\n".as_bytes(), &external_schema(), None).unwrap();
    assert_eq!(bare.generator, "external:unnamed");
}

#[test]
fn external_rows_outside_the_schema_are_counted() {
    let text = "age,sex,grade\n17,F,low\n18,X,high\n19,M,medium\n20,M,high\n";
    match load_external_synthetic(text.as_bytes(), &external_schema(), None) {
        Err(Error::SchemaViolation { count, .. }) => assert_eq!(count, 2),
        other => panic!("expected a schema violation, got {other:?}"),
    }
}

#[test]
fn external_header_order_is_free() {
    let text = "grade,age,sex\nhigh,18,M\n";
    let ext = load_external_synthetic(text.as_bytes(), &external_schema(), None).unwrap();
    assert_eq!(ext.dataset.row(0), vec![Cell::Num(18.0), Cell::Cat(1), Cell::Cat(1)]);
    assert_eq!(ext.dataset.schema().column(0).kind, ColumnKind::Continuous);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gradient_penalty_is_never_negative(seed in 0u64..1000, n in 30usize..80) {
        let ds = gan_toy(n, seed);
        let cfg = CtganConfig {
            iterations: 10,
            batch_size: 20,
            noise_dim: 8,
            generator_hidden: vec![16],
            critic_hidden: vec![16],
            ..Default::default()
        };
        let model = ctgan_fit(&ds, &cfg, seed).unwrap();
        prop_assert!(model.training_log.iter().all(|l| l.gradient_penalty >= 0.0));
    }
}
