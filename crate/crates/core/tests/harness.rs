mod common;

use std::fs;
use std::path::Path;

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use synthlab_core::classifiers::{Family, ParamGrid};
use synthlab_core::generators::{baseline_fit_sample, BaselineKind};
use synthlab_core::harness::*;
use synthlab_core::metrics::sdis;
use synthlab_core::numeric::seeded;
use synthlab_core::tabular::{split, write_csv, ColumnData, ColumnSpec, Dataset, Schema};

use common::mixed_toy;

fn write_dataset(dir: &Path, name: &str, ds: &Dataset) {
    write_csv(ds, fs::File::create(dir.join(format!("{name}.csv"))).unwrap()).unwrap();
    fs::write(dir.join(format!("{name}.schema.json")), ds.schema().to_json()).unwrap();
}

fn toy_config(generators: serde_json::Value, repetitions: usize) -> BenchmarkConfig {
    serde_json::from_value(serde_json::json!({
        "datasets": [{"id": "toy", "path": "toy.csv", "schema": "toy.schema.json"}],
        "generators": generators,
        "classifiers": [
            {"family": "decision_tree", "grid": {"max_depth": [3, 5]}},
            {"family": "knn", "grid": {"k": [3, 5]}}
        ],
        "target": "label",
        "repetitions": repetitions,
        "seed": 17
    }))
    .unwrap()
}

fn toy_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), "toy", &mixed_toy(240, 5));
    dir
}

fn bootstrap() -> serde_json::Value {
    serde_json::json!([{"id": "bootstrap", "model": {"kind": "bootstrap"}}])
}

fn report_bytes(report: &Report) -> Vec<u8> {
    let mut out = Vec::new();
    report.write_json(&mut out).unwrap();
    report.write_cells_csv(&mut out).unwrap();
    report.write_aggregates_csv(&mut out).unwrap();
    out
}

#[test]
fn sem_hand_arithmetic() {
    let (mean, sem) = mean_sem(&[0.6, 0.8]).unwrap();
    assert!((mean - 0.7).abs() < 1e-15);
    assert!((sem.unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(mean_sem(&[0.42]), Some((0.42, None)));
    assert_eq!(mean_sem(&[]), None);
}

#[test]
fn two_repetitions_aggregate_to_half_the_difference() {
    let dir = toy_dir();
    let report = run_benchmark(&toy_config(bootstrap(), 2), dir.path()).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert_eq!(report.failed_cells(), 0);
    let a = report.cells[0].metrics.as_ref().unwrap().flatten();
    let b = report.cells[1].metrics.as_ref().unwrap().flatten();
    assert_eq!(a.len(), b.len());
    for ((name, v1), (_, v2)) in a.iter().zip(&b) {
        let agg = report.aggregates.iter().find(|g| &g.metric == name).unwrap();
        assert_eq!(agg.n, 2);
        assert!((agg.mean - (v1 + v2) / 2.0).abs() < 1e-12, "{name}");
        assert!((agg.sem.unwrap() - (v1 - v2).abs() / 2.0).abs() < 1e-12, "{name}");
    }
    for cell in &report.cells {
        let m = cell.metrics.as_ref().unwrap();
        let s = m.scores;
        assert_eq!(s.sdis, sdis(m.fidelity.quality, s.ood_aucroc, s.detection));
        assert_eq!(s.detection, m.detection.detection);
        assert_eq!(s.ood_aucroc, m.ood.ood_aucroc);
        assert_eq!(m.real_rows, 240);
        assert_eq!(m.synthetic_rows, 240);
        assert!(cell.timings.is_none());
    }
}

#[test]
fn single_repetition_has_null_sem() {
    let dir = toy_dir();
    let report = run_benchmark(&toy_config(bootstrap(), 1), dir.path()).unwrap();
    let values = report.cells[0].metrics.as_ref().unwrap().flatten();
    for agg in &report.aggregates {
        assert_eq!(agg.sem, None);
        let v = values.iter().find(|(n, _)| *n == agg.metric).unwrap().1;
        assert_eq!(agg.mean, v);
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = toy_dir();
    let gens = serde_json::json!([
        {"id": "independence", "model": {"kind": "independence"}},
        {"id": "ctgan", "model": {"kind": "ctgan", "config": {
            "iterations": 5, "batch_size": 40, "noise_dim": 8,
            "generator_hidden": [16], "critic_hidden": [16]
        }}}
    ]);
    let first = run_benchmark(&toy_config(gens.clone(), 2), dir.path()).unwrap();
    let second = run_benchmark(&toy_config(gens, 2), dir.path()).unwrap();
    assert_eq!(first.failed_cells(), 0, "{:?}", first.cells.iter().filter_map(|c| c.error.as_ref()).collect::<Vec<_>>());
    assert_eq!(report_bytes(&first), report_bytes(&second));
}

#[test]
fn repetitions_are_seed_isolated() {
    let dir = toy_dir();
    let one = run_benchmark(&toy_config(bootstrap(), 1), dir.path()).unwrap();
    let two = run_benchmark(&toy_config(bootstrap(), 2), dir.path()).unwrap();
    assert_eq!(one.cells[0], two.cells[0]);
    assert_ne!(two.cells[0].seeds, two.cells[1].seeds);
    assert_ne!(two.cells[0].metrics, two.cells[1].metrics);
    assert_eq!(cell_seeds(17, "toy", "bootstrap", 1), two.cells[1].seeds);
    // the split is shared across generators of the same repetition
    assert_eq!(cell_seeds(17, "toy", "a", 0).split, cell_seeds(17, "toy", "b", 0).split);
}

#[test]
fn a_failing_cell_does_not_stop_the_run() {
    let dir = toy_dir();
    fs::write(dir.path().join("bad.csv"), "x1,x2,color,label\n1.0,2.0,purple,yes\n").unwrap();
    let gens = serde_json::json!([
        {"id": "bootstrap", "model": {"kind": "bootstrap"}},
        {"id": "llm", "model": {"kind": "external", "paths": {"toy": "bad.csv"}}}
    ]);
    let report = run_benchmark(&toy_config(gens, 1), dir.path()).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert_eq!(report.failed_cells(), 1);
    let failed = report.cells.iter().find(|c| c.error.is_some()).unwrap();
    assert_eq!(failed.generator, "llm");
    assert!(failed.metrics.is_none());
    assert!(report.aggregates.iter().all(|a| a.generator == "bootstrap"));
}

#[test]
fn external_synthetic_cells_are_evaluated() {
    let dir = toy_dir();
    let syn = baseline_fit_sample(BaselineKind::Bootstrap, &mixed_toy(240, 5), 240, 3).unwrap();
    let mut text = b"# generator: DialoGPT\n".to_vec();
    write_csv(&syn, &mut text).unwrap();
    fs::write(dir.path().join("llm.csv"), text).unwrap();
    let gens = serde_json::json!([{"id": "llm", "model": {"kind": "external", "paths": {"toy": "llm.csv"}}}]);
    let report = run_benchmark(&toy_config(gens, 1), dir.path()).unwrap();
    assert_eq!(report.failed_cells(), 0, "{:?}", report.cells[0].error);
}

#[test]
fn invalid_configs_are_rejected_up_front() {
    let dir = toy_dir();
    let mut cfg = toy_config(bootstrap(), 0);
    assert!(run_benchmark(&cfg, dir.path()).is_err());
    cfg.repetitions = 1;
    cfg.target = "x1".into();
    assert!(cfg.validate(dir.path()).is_err());
    cfg.target = "nope".into();
    assert!(cfg.validate(dir.path()).is_err());
    cfg.target = "label".into();
    cfg.datasets[0].path = "missing.csv".into();
    assert!(cfg.validate(dir.path()).is_err());
    assert!(BenchmarkConfig::from_json(r#"{"datasets": [], "generators": [], "target": "y", "bogus": 1}"#).is_err());
}

#[test]
fn config_defaults() {
    let cfg = BenchmarkConfig::from_json(r#"{"datasets": [], "generators": [], "target": "y"}"#).unwrap();
    assert_eq!(cfg.repetitions, 2);
    assert_eq!(cfg.folds, 3);
    let families: Vec<Family> = cfg.classifiers.iter().map(|c| c.family).collect();
    assert_eq!(families, UTILITY_FAMILIES.to_vec());
    assert!(!cfg.stratify && !cfg.record_timings);
}

#[test]
fn stratify_option_changes_the_split() {
    let dir = toy_dir();
    let mut cfg = toy_config(bootstrap(), 1);
    cfg.stratify = true;
    let report = run_benchmark(&cfg, dir.path()).unwrap();
    let m = report.cells[0].metrics.as_ref().unwrap();
    // 240 rows split 168 / 72 either way
    assert_eq!(m.utility.real_train_rows, 168);
    assert_eq!(m.utility.test_rows, 72);
    assert_ne!(report, run_benchmark(&toy_config(bootstrap(), 1), dir.path()).unwrap());
}

#[test]
fn emitted_json_round_trips() {
    let dir = toy_dir();
    let report = run_benchmark(&toy_config(bootstrap(), 2), dir.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let files = emit_report(&report, ReportFormat::Json, out.path()).unwrap();
    let parsed = Report::from_json(fs::File::open(&files[0]).unwrap()).unwrap();
    assert_eq!(parsed, report);

    let text = fs::read_to_string(&files[0]).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["format_version", "tool_version", "config", "cells", "aggregates"] {
        assert!(keys.contains(&k));
    }
}

#[test]
fn empty_report_is_valid_json() {
    let cfg = toy_config(bootstrap(), 1);
    let report = Report::new(cfg, Vec::new());
    let mut out = Vec::new();
    report.write_json(&mut out).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(value["cells"], serde_json::json!([]));
    assert_eq!(Report::from_json(out.as_slice()).unwrap(), report);
}

#[test]
fn aggregate_rows_render_like_a_results_table() {
    let cfg = toy_config(bootstrap(), 2);
    let mut report = Report::new(cfg, Vec::new());
    report.aggregates.push(Aggregate {
        dataset: "A".into(),
        generator: "ctgan".into(),
        metric: "quality".into(),
        n: 2,
        mean: 0.6403,
        sem: Some(0.1387),
    });
    report.aggregates.push(Aggregate { dataset: "A".into(), generator: "ctgan".into(), metric: "sdis".into(), n: 1, mean: 0.5, sem: None });
    let mut out = Vec::new();
    report.write_aggregates_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["dataset,generator,metric,mean,sem", "A,ctgan,quality,0.6403,0.1387", "A,ctgan,sdis,0.5,"]);
}

#[test]
fn csv_files_hold_every_metric() {
    let dir = toy_dir();
    let report = run_benchmark(&toy_config(bootstrap(), 2), dir.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    emit_report(&report, ReportFormat::Csv, out.path()).unwrap();
    let cells = fs::read_to_string(out.path().join(CELLS_CSV)).unwrap();
    let per_cell = report.cells[0].metrics.as_ref().unwrap().flatten().len();
    assert_eq!(cells.lines().count(), 1 + 2 * per_cell);
    assert!(cells.lines().any(|l| l.starts_with("toy,bootstrap,1,sdis,")));
    let aggs = fs::read_to_string(out.path().join(AGGREGATES_CSV)).unwrap();
    assert_eq!(aggs.lines().count(), 1 + per_cell);
    assert!(cells.contains("utility.knn.synthetic.accuracy"));
}

/// Separable rule: label = 1 when x1 + x2 > 0.
fn separable(n: usize, seed: u64, classes: usize) -> Dataset {
    let mut rng = seeded(seed);
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let a: f64 = rng.random_range(-3.0..3.0);
        let b: f64 = rng.random_range(-3.0..3.0);
        x1.push(Some(a));
        x2.push(Some(b));
        let label = if classes == 2 { usize::from(a + b > 0.0) } else { usize::from(a > -1.0) + usize::from(a > 1.0) };
        y.push(Some(label));
    }
    let cats: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
    let schema = Schema::new(vec![
        ColumnSpec::continuous("x1"),
        ColumnSpec::continuous("x2"),
        ColumnSpec::categorical("y", cats).as_target(),
    ])
    .unwrap();
    Dataset::new(schema, vec![ColumnData::Continuous(x1), ColumnData::Continuous(x2), ColumnData::Categorical(y)]).unwrap()
}

fn four_families() -> Vec<(Family, ParamGrid)> {
    UTILITY_FAMILIES.iter().map(|&f| (f, f.default_grid())).collect()
}

#[test]
fn real_as_synthetic_closes_the_utility_gap() {
    let ds = separable(400, 1, 2);
    let (train, test) = split(&ds, 0.7, 2, Some(2)).unwrap();
    let table = utility_experiment(&train, &test, &train, "y", &four_families(), 3, 5).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert_eq!(table.synthetic_train_rows, 196);
    for row in &table.rows {
        let (syn_acc, _, _) = row.synthetic.scores().unwrap();
        let (real_acc, _, _) = row.real.scores().unwrap();
        assert!((syn_acc - real_acc).abs() < 0.05, "{}: {syn_acc} vs {real_acc}", row.family);
        assert!(real_acc > 0.85);
    }
}

#[test]
fn independent_marginals_lose_an_interaction_target() {
    // label = XOR of the signs of two columns: no marginal carries signal
    let mut rng = seeded(4);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (mut a, mut b, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..600 {
        let u: f64 = noise.sample(&mut rng);
        let v: f64 = noise.sample(&mut rng);
        a.push(Some(u));
        b.push(Some(v));
        y.push(Some(usize::from((u > 0.0) ^ (v > 0.0))));
    }
    let schema = Schema::new(vec![
        ColumnSpec::continuous("a"),
        ColumnSpec::continuous("b"),
        ColumnSpec::categorical("y", ["even", "odd"]).as_target(),
    ])
    .unwrap();
    let ds = Dataset::new(schema, vec![ColumnData::Continuous(a), ColumnData::Continuous(b), ColumnData::Categorical(y)]).unwrap();
    let (train, test) = split(&ds, 0.7, 1, Some(2)).unwrap();
    let syn = baseline_fit_sample(BaselineKind::Independence, &train, 600, 2).unwrap();
    let table = utility_experiment(&train, &test, &syn, "y", &four_families(), 3, 3).unwrap();
    let syn_auc: Vec<f64> = table.rows.iter().map(|r| r.synthetic.scores().unwrap().2).collect();
    let real_auc: Vec<f64> = table.rows.iter().map(|r| r.real.scores().unwrap().2).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&syn_auc) - 0.5).abs() < 0.1, "{syn_auc:?}");
    assert!(mean(&real_auc) > 0.85, "{real_auc:?}");
}

#[test]
fn multiclass_targets_are_scored_per_family() {
    let ds = separable(450, 3, 3);
    let (train, test) = split(&ds, 0.7, 3, Some(2)).unwrap();
    let table = utility_experiment(&train, &test, &train, "y", &four_families(), 3, 1).unwrap();
    for row in &table.rows {
        let (_, _, auc) = row.real.scores().unwrap();
        assert!(auc > 0.8 && auc <= 1.0, "{}: {auc}", row.family);
    }
}

#[test]
fn single_class_synthetic_data_is_reported_as_degenerate() {
    let ds = separable(300, 5, 2);
    let (train, test) = split(&ds, 0.7, 5, Some(2)).unwrap();
    let ones: Vec<usize> = (0..train.n_rows()).filter(|&i| train.label(i, 2) == Some("c1")).collect();
    let syn = train.select_rows(&ones);
    let table = utility_experiment(&train, &test, &syn, "y", &four_families(), 3, 1).unwrap();
    for row in &table.rows {
        assert!(matches!(row.synthetic, FitOutcome::Degenerate { .. }));
        assert!(row.real.scores().is_some());
    }
}

fn two_clusters(per: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    Array2::from_shape_fn((2 * per, 10), |(i, j)| {
        let center = if i < per || j > 0 { 0.0 } else { 20.0 };
        center + noise.sample(&mut rng)
    })
}

#[test]
fn tsne_keeps_clusters_apart() {
    let x = two_clusters(100, 8);
    let res = tsne_project(x.view(), &TsneConfig::default(), 3).unwrap();
    assert_eq!(res.coords.dim(), (200, 2));
    assert!(res.coords.iter().all(|v| v.is_finite()));
    assert_eq!(res.kl_log.len(), 500);

    let centroid = |r: std::ops::Range<usize>| {
        let n = r.len() as f64;
        let (sx, sy) = r.clone().fold((0.0, 0.0), |(a, b), i| (a + res.coords[[i, 0]], b + res.coords[[i, 1]]));
        (sx / n, sy / n)
    };
    let spread = |r: std::ops::Range<usize>, c: (f64, f64)| {
        let n = r.len() as f64;
        r.map(|i| ((res.coords[[i, 0]] - c.0).powi(2) + (res.coords[[i, 1]] - c.1).powi(2)).sqrt()).sum::<f64>() / n
    };
    let (ca, cb) = (centroid(0..100), centroid(100..200));
    let gap = ((ca.0 - cb.0).powi(2) + (ca.1 - cb.1).powi(2)).sqrt();
    let intra = (spread(0..100, ca) + spread(100..200, cb)) / 2.0;
    assert!(gap > 3.0 * intra, "gap {gap}, spread {intra}");

    for w in res.kl_log[100..].windows(2) {
        assert!(w[1] <= w[0] + 1e-6);
    }
    assert!(res.kl_log[499] <= res.kl_log[100]);
}

#[test]
fn tsne_is_deterministic_per_seed() {
    let x = two_clusters(20, 2);
    let cfg = TsneConfig { iterations: 60, ..Default::default() };
    let a = tsne_project(x.view(), &cfg, 1).unwrap();
    assert_eq!(a, tsne_project(x.view(), &cfg, 1).unwrap());
    assert_ne!(a.coords, tsne_project(x.view(), &cfg, 2).unwrap().coords);
    // 40 points cap the perplexity at 13
    assert_eq!(a.perplexity, 13.0);
}

#[test]
fn joint_projection_labels_origins() {
    let real = mixed_toy(60, 1);
    let syn = mixed_toy(40, 2);
    let cfg = TsneConfig { iterations: 50, ..Default::default() };
    let p = project_datasets(&real, Some(&syn), &cfg, 0).unwrap();
    assert_eq!(p.x.len(), 100);
    assert_eq!(p.origin.iter().filter(|o| **o == "synthetic").count(), 40);
    let mut out = Vec::new();
    p.write_csv(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 101);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sem_matches_direct_recomputation(values in prop::collection::vec(-1e3f64..1e3, 1..12)) {
        let (mean, sem) = mean_sem(&values).unwrap();
        let n = values.len() as f64;
        let direct_mean = values.iter().sum::<f64>() / n;
        prop_assert!((mean - direct_mean).abs() < 1e-12 * (1.0 + direct_mean.abs()));
        if values.len() == 1 {
            prop_assert!(sem.is_none());
        } else {
            let ss: f64 = values.iter().map(|v| (v - direct_mean) * (v - direct_mean)).sum();
            let direct = (ss / (n - 1.0) / n).sqrt();
            prop_assert!((sem.unwrap() - direct).abs() < 1e-12 * (1.0 + direct));
        }
    }
}
