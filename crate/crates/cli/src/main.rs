use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use synthlab_core::classifiers::Family;
use synthlab_core::generators::{baseline_fit_sample, ctgan_fit, BaselineKind, CtganConfig, CtganModel};
use synthlab_core::harness::{
    emit_report, project_datasets, read_dataset, run_benchmark, utility_experiment, BenchmarkConfig,
    ReportFormat, TsneConfig, TRAIN_FRACTION, UTILITY_FAMILIES,
};
use synthlab_core::metrics::{
    detection, ood_aucroc, quality, resemblance_report, DetectionReport, FidelityReport, OodReport,
    ResemblanceReport, UtilityScores,
};
use synthlab_core::numeric::RngStream;
use synthlab_core::tabular::{impute_missing, load_csv, split, write_csv, ColumnData, Dataset};
use synthlab_core::Error;

const THREADS_VAR: &str = "SYNTHLAB_THREADS";

/// Synthetic tabular data generation and evaluation.
#[derive(Parser)]
#[command(name = "synthlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Ctgan,
    Bootstrap,
    Independence,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV against its schema and print a column profile.
    Inspect {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Fit a generator and write synthetic rows.
    Generate {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rows to generate; defaults to the input size.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Full GAN configuration as JSON; the flags above override it.
        #[arg(long)]
        ctgan_config: Option<PathBuf>,
        /// Also save the fitted GAN.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Draw rows from a saved GAN.
    Sample {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resemblance, fidelity, detection, OOD utility and SDIS of a synthetic
    /// file. The real data is split 70/30; the synthetic rows are compared
    /// with the 70% part and OOD utility is measured on the 30% part.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep the target's class proportions in both halves of the split.
        #[arg(long)]
        stratify: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train-on-synthetic / test-on-real comparison with grid search.
    Utility {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        target: String,
        /// Comma-separated classifier families.
        #[arg(long, value_delimiter = ',', default_values_t = UTILITY_FAMILIES.map(|f| f.to_string()))]
        families: Vec<String>,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep the target's class proportions in both halves of the split.
        #[arg(long)]
        stratify: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark configuration; exits with 1 when any cell failed.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configuration's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact t-SNE of a dataset, optionally jointly with a second one.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        joint: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration KL divergence log.
        #[arg(long)]
        kl_out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_dataset(path: &Path, ds: &Dataset) -> anyhow::Result<()> {
    let mut w = create(path)?;
    write_csv(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Real data plus a synthetic file read against the real closed schema.
fn load_pair(real: &Path, synthetic: &Path, schema: &Path) -> anyhow::Result<(Dataset, Dataset)> {
    let real = impute_missing(&read_dataset(real, schema)?)?;
    let file = File::open(synthetic).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", synthetic.display()))))?;
    let syn = impute_missing(&load_csv(file, &real.schema().closed())?)?;
    Ok((real, syn))
}

fn real_split(real: &Dataset, target: &str, seed: u64, stratify: bool) -> anyhow::Result<(Dataset, Dataset)> {
    let t = real
        .schema()
        .index_of(target)
        .ok_or_else(|| Error::Schema(format!("no target column {target:?}")))?;
    let seed = RngStream::new(seed).child("split").derived_seed();
    Ok(split(real, TRAIN_FRACTION, seed, stratify.then_some(t))?)
}

fn inspect(data: &Path, schema: &Path) -> anyhow::Result<()> {
    let ds = read_dataset(data, schema)?;
    let columns: Vec<serde_json::Value> = ds
        .schema()
        .columns()
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let mut entry = json!({
                "name": spec.name,
                "kind": spec.kind,
                "target": spec.target,
                "missing": ds.column(c).missing_count(),
            });
            match ds.column(c) {
                ColumnData::Continuous(_) => {
                    let v = ds.continuous_values(c);
                    if !v.is_empty() {
                        let n = v.len() as f64;
                        let mean = v.iter().sum::<f64>() / n;
                        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                        entry["min"] = json!(v.iter().copied().fold(f64::INFINITY, f64::min));
                        entry["max"] = json!(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                        entry["mean"] = json!(mean);
                        entry["sd"] = json!(sd);
                    }
                }
                ColumnData::Categorical(_) => {
                    let counts: serde_json::Map<String, serde_json::Value> =
                        spec.categories.iter().cloned().zip(ds.category_counts(c).into_iter().map(|n| json!(n))).collect();
                    entry["categories"] = serde_json::Value::Object(counts);
                }
            }
            entry
        })
        .collect();
    let profile = json!({ "rows": ds.n_rows(), "columns": columns });
    println!("{}", serde_json::to_string_pretty(&profile)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn generate(
    model: Model,
    input: &Path,
    schema: &Path,
    out: &Path,
    seed: u64,
    rows: Option<usize>,
    overrides: (Option<usize>, Option<usize>, Option<f64>),
    ctgan_config: Option<&Path>,
    save_model: Option<&Path>,
) -> anyhow::Result<()> {
    let train = impute_missing(&read_dataset(input, schema)?)?;
    let n = rows.unwrap_or(train.n_rows());
    let stream = RngStream::new(seed);
    let syn = match model {
        Model::Ctgan => {
            let mut cfg = match ctgan_config {
                Some(p) => serde_json::from_str::<CtganConfig>(&fs::read_to_string(p)?).map_err(Error::from)?,
                None => CtganConfig::default(),
            };
            let (iterations, batch_size, lr) = overrides;
            cfg.iterations = iterations.unwrap_or(cfg.iterations);
            cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
            cfg.lr = lr.unwrap_or(cfg.lr);
            let fitted = ctgan_fit(&train, &cfg, stream.child("fit").derived_seed())?;
            if let Some(path) = save_model {
                let mut w = create(path)?;
                fitted.save(&mut w)?;
                w.flush()?;
            }
            fitted.sample(n, stream.child("sample").derived_seed())?
        }
        Model::Bootstrap | Model::Independence => {
            if save_model.is_some() {
                bail!(Error::InvalidInput("--save-model applies to the ctgan model only".into()));
            }
            let kind = if matches!(model, Model::Bootstrap) { BaselineKind::Bootstrap } else { BaselineKind::Independence };
            baseline_fit_sample(kind, &train, n, stream.child("sample").derived_seed())?
        }
    };
    write_dataset(out, &syn)
}

#[derive(Serialize)]
struct Evaluation {
    real_train_rows: usize,
    real_test_rows: usize,
    synthetic_rows: usize,
    resemblance: ResemblanceReport,
    fidelity: FidelityReport,
    detection: DetectionReport,
    ood: OodReport,
    scores: UtilityScores,
}

fn evaluate(
    real: &Path,
    synthetic: &Path,
    schema: &Path,
    target: &str,
    seed: u64,
    stratify: bool,
    out: &Path,
) -> anyhow::Result<()> {
    let (real, syn) = load_pair(real, synthetic, schema)?;
    let (train, test) = real_split(&real, target, seed, stratify)?;
    let stream = RngStream::new(seed);
    let fidelity = quality(&train, &syn)?;
    let det = detection(&train, &syn, stream.child("detection").derived_seed())?;
    let ood = ood_aucroc(&syn, &test, target, stream.child("ood").derived_seed())?;
    let evaluation = Evaluation {
        real_train_rows: train.n_rows(),
        real_test_rows: test.n_rows(),
        synthetic_rows: syn.n_rows(),
        resemblance: resemblance_report(&train, &syn)?,
        scores: UtilityScores::new(fidelity.quality, det.detection, ood.ood_aucroc),
        fidelity,
        detection: det,
        ood,
    };
    write_json_file(&out.join("evaluation.json"), &evaluation)
}

#[allow(clippy::too_many_arguments)]
fn utility(
    real: &Path,
    synthetic: &Path,
    schema: &Path,
    target: &str,
    families: &[String],
    folds: usize,
    seed: u64,
    stratify: bool,
    out: &Path,
) -> anyhow::Result<()> {
    let families = families
        .iter()
        .map(|s| {
            let f: Family = s.trim().parse()?;
            Ok((f, f.default_grid()))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let (real, syn) = load_pair(real, synthetic, schema)?;
    let (train, test) = real_split(&real, target, seed, stratify)?;
    let table = utility_experiment(&train, &test, &syn, target, &families, folds, RngStream::new(seed).child("utility").derived_seed())?;
    write_json_file(&out.join("utility.json"), &table)
}

/// Returns the number of failed cells.
fn benchmark(config_path: &Path, out: Option<&Path>) -> anyhow::Result<usize> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", config_path.display()))))?;
    let config = BenchmarkConfig::from_json(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out_dir = match (out, &config.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => bail!(Error::InvalidInput("no output directory: pass --out or set output_dir".into())),
    };
    let report = run_benchmark(&config, base)?;
    emit_report(&report, ReportFormat::Json, &out_dir)?;
    emit_report(&report, ReportFormat::Csv, &out_dir)?;
    for cell in report.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "cell {}/{}/{} failed: {}",
            cell.dataset,
            cell.generator,
            cell.repetition,
            cell.error.as_deref().unwrap_or_default()
        );
    }
    Ok(report.failed_cells())
}

#[allow(clippy::too_many_arguments)]
fn project(
    input: &Path,
    schema: &Path,
    joint: Option<&Path>,
    perplexity: f64,
    iterations: usize,
    seed: u64,
    out: &Path,
    kl_out: Option<&Path>,
) -> anyhow::Result<()> {
    let (real, other) = match joint {
        Some(j) => {
            let (r, s) = load_pair(input, j, schema)?;
            (r, Some(s))
        }
        None => (impute_missing(&read_dataset(input, schema)?)?, None),
    };
    let cfg = TsneConfig { perplexity, iterations, ..Default::default() };
    let projection = project_datasets(&real, other.as_ref(), &cfg, seed)?;
    let mut w = create(out)?;
    projection.write_csv(&mut w)?;
    w.flush()?;
    if let Some(path) = kl_out {
        let mut w = create(path)?;
        projection.write_kl_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var(THREADS_VAR) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidInput(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Configuration, input and validation problems exit with 2, anything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Numerical(_) | Error::Shape(_)) => 1,
        Some(_) => 2,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Inspect { data, schema } => inspect(&data, &schema)?,
        Command::Generate { model, input, schema, out, seed, rows, iterations, batch_size, lr, ctgan_config, save_model } => {
            generate(
                model,
                &input,
                &schema,
                &out,
                seed,
                rows,
                (iterations, batch_size, lr),
                ctgan_config.as_deref(),
                save_model.as_deref(),
            )?
        }
        Command::Sample { model_file, rows, seed, out } => {
            let file = File::open(&model_file).with_context(|| format!("opening {}", model_file.display()))?;
            let model = CtganModel::load(std::io::BufReader::new(file))?;
            write_dataset(&out, &model.sample(rows, seed)?)?
        }
        Command::Evaluate { real, synthetic, schema, target, seed, stratify, out } => {
            evaluate(&real, &synthetic, &schema, &target, seed, stratify, &out)?
        }
        Command::Utility { real, synthetic, schema, target, families, folds, seed, stratify, out } => {
            utility(&real, &synthetic, &schema, &target, &families, folds, seed, stratify, &out)?
        }
        Command::Benchmark { config, out } => {
            if benchmark(&config, out.as_deref())? > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Project { input, schema, joint, perplexity, iterations, seed, out, kl_out } => {
            project(&input, &schema, joint.as_deref(), perplexity, iterations, seed, &out, kl_out.as_deref())?
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
