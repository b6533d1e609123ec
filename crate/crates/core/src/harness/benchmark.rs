use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::classifiers::{Family, ParamGrid};
use crate::error::{Error, Result};
use crate::generators::{baseline_fit_sample, ctgan_fit, load_external_synthetic};
use crate::metrics::{detection, ood_aucroc, quality, resemblance_report, UtilityScores};
use crate::numeric::RngStream;
use crate::tabular::{impute_missing, sample_fraction, split, Dataset};

use super::config::{read_dataset, resolve, with_path, BenchmarkConfig, GeneratorEntry, GeneratorModel};
use super::report::{CellMetrics, CellResult, CellSeeds, Report, Timings};
use super::utility::utility_experiment;

/// Share of each real dataset used for training.
pub const TRAIN_FRACTION: f64 = 0.7;

/// Seeds of one cell. The split depends only on (dataset, repetition) so
/// every generator of a repetition sees the same partition.
pub fn cell_seeds(root: u64, dataset: &str, generator: &str, repetition: usize) -> CellSeeds {
    let cell = RngStream::new(root).child("cell").child(dataset).child(generator).child(repetition);
    CellSeeds {
        split: RngStream::new(root).child("split").child(dataset).child(repetition).derived_seed(),
        fit: cell.child("fit").derived_seed(),
        sample: cell.child("sample").derived_seed(),
        metrics: cell.child("metrics").derived_seed(),
    }
}

/// Loads, subsamples and imputes one configured dataset.
fn prepare_dataset(config: &BenchmarkConfig, idx: usize, base_dir: &Path) -> Result<Dataset> {
    let entry = &config.datasets[idx];
    let raw = read_dataset(&resolve(base_dir, &entry.path), &resolve(base_dir, &entry.schema))?;
    let sampled = match entry.sample_fraction {
        Some(f) if f < 1.0 => {
            let seed = entry
                .sample_seed
                .unwrap_or_else(|| RngStream::new(config.seed).child("subsample").child(&entry.id).derived_seed());
            sample_fraction(&raw, f, seed)?
        }
        _ => raw,
    };
    impute_missing(&sampled)
}

struct CellJob<'a> {
    dataset: usize,
    generator: &'a GeneratorEntry,
    repetition: usize,
}

fn synthesize(
    job: &CellJob<'_>,
    config: &BenchmarkConfig,
    base_dir: &Path,
    real: &Dataset,
    train: &Dataset,
    seeds: &CellSeeds,
    timings: &mut Timings,
) -> Result<Dataset> {
    let n = real.n_rows();
    match &job.generator.model {
        GeneratorModel::Ctgan { config: cfg } => {
            let start = Instant::now();
            let model = ctgan_fit(train, cfg, seeds.fit)?;
            timings.fit_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let syn = model.sample(n, seeds.sample)?;
            timings.sample_seconds = start.elapsed().as_secs_f64();
            Ok(syn)
        }
        GeneratorModel::Bootstrap | GeneratorModel::Independence => {
            let kind = job.generator.baseline_kind().expect("baseline model");
            let start = Instant::now();
            let syn = baseline_fit_sample(kind, train, n, seeds.sample)?;
            timings.sample_seconds = start.elapsed().as_secs_f64();
            Ok(syn)
        }
        GeneratorModel::External { paths, name } => {
            let id = &config.datasets[job.dataset].id;
            let path = resolve(base_dir, paths.get(id).expect("cells exist only for listed datasets"));
            let file = File::open(&path).map_err(|e| with_path(e, &path))?;
            let ext = load_external_synthetic(file, &real.schema().closed(), name.as_deref())?;
            Ok(ext.dataset)
        }
    }
}

fn evaluate_cell(
    job: &CellJob<'_>,
    config: &BenchmarkConfig,
    base_dir: &Path,
    real: &Dataset,
    families: &[(Family, ParamGrid)],
    seeds: &CellSeeds,
    timings: &mut Timings,
) -> Result<CellMetrics> {
    let target = real
        .schema()
        .index_of(&config.target)
        .ok_or_else(|| Error::Schema(format!("no target column {:?}", config.target)))?;
    let (train, test) = split(real, TRAIN_FRACTION, seeds.split, config.stratify.then_some(target))?;
    let syn = synthesize(job, config, base_dir, real, &train, seeds, timings)?;

    let start = Instant::now();
    let stream = RngStream::new(seeds.metrics);
    let resemblance = resemblance_report(&train, &syn)?;
    let fidelity = quality(&train, &syn)?;
    let det = detection(&train, &syn, stream.child("detection").derived_seed())?;
    let ood = ood_aucroc(&syn, &test, &config.target, stream.child("ood").derived_seed())?;
    let scores = UtilityScores::new(fidelity.quality, det.detection, ood.ood_aucroc);
    let utility = utility_experiment(&train, &test, &syn, &config.target, families, config.folds, stream.child("utility").derived_seed())?;
    timings.metrics_seconds = start.elapsed().as_secs_f64();
    Ok(CellMetrics {
        real_rows: real.n_rows(),
        synthetic_rows: syn.n_rows(),
        resemblance,
        fidelity,
        detection: det,
        ood,
        scores,
        utility,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs every (dataset, generator, repetition) cell.
///
/// Configuration and input problems are returned as errors before any cell
/// runs; a failing cell is recorded in the report and the rest continue.
/// Relative paths in `config` are taken against `base_dir`.
pub fn run_benchmark(config: &BenchmarkConfig, base_dir: &Path) -> Result<Report> {
    config.validate(base_dir)?;
    let datasets: Vec<Dataset> = (0..config.datasets.len())
        .map(|i| {
            prepare_dataset(config, i, base_dir)
                .map_err(|e| Error::InvalidInput(format!("dataset {}: {e}", config.datasets[i].id)))
        })
        .collect::<Result<_>>()?;
    let families: Vec<(Family, ParamGrid)> = config.classifiers.iter().map(|fg| (fg.family, fg.resolved())).collect();

    let mut jobs = Vec::new();
    for (d, entry) in config.datasets.iter().enumerate() {
        for g in &config.generators {
            if let GeneratorModel::External { paths, .. } = &g.model {
                if !paths.contains_key(&entry.id) {
                    continue;
                }
            }
            for repetition in 0..config.repetitions {
                jobs.push(CellJob { dataset: d, generator: g, repetition });
            }
        }
    }

    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|job| {
            let dataset = config.datasets[job.dataset].id.clone();
            let seeds = cell_seeds(config.seed, &dataset, &job.generator.id, job.repetition);
            let mut timings = Timings { fit_seconds: 0.0, sample_seconds: 0.0, metrics_seconds: 0.0 };
            let outcome = catch_unwind(AssertUnwindSafe(|| {
                evaluate_cell(job, config, base_dir, &datasets[job.dataset], &families, &seeds, &mut timings)
            }))
            .unwrap_or_else(|p| Err(Error::Numerical(format!("panic: {}", panic_message(p)))));
            let (metrics, error) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            CellResult {
                dataset,
                generator: job.generator.id.clone(),
                repetition: job.repetition,
                seeds,
                metrics,
                error,
                timings: config.record_timings.then_some(timings),
            }
        })
        .collect();
    Ok(Report::new(config.clone(), cells))
}
