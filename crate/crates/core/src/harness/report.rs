use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{DetectionReport, FidelityReport, OodReport, ResemblanceReport, UtilityScores};

use super::config::{with_path, BenchmarkConfig};
use super::utility::UtilityTable;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub split: u64,
    pub fit: u64,
    pub sample: u64,
    pub metrics: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fit_seconds: f64,
    pub sample_seconds: f64,
    pub metrics_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub real_rows: usize,
    pub synthetic_rows: usize,
    pub resemblance: ResemblanceReport,
    pub fidelity: FidelityReport,
    pub detection: DetectionReport,
    pub ood: OodReport,
    pub scores: UtilityScores,
    pub utility: UtilityTable,
}

impl CellMetrics {
    /// Every scalar of the cell as `(metric, value)`, in a fixed order.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = vec![
            ("quality".into(), self.fidelity.quality),
            ("detection".into(), self.scores.detection),
            ("ood_aucroc".into(), self.scores.ood_aucroc),
            ("sdis".into(), self.scores.sdis),
            ("alpha_precision".into(), self.fidelity.alpha_precision),
            ("beta_recall".into(), self.fidelity.beta_recall),
            ("authenticity".into(), self.fidelity.authenticity),
        ];
        let r = &self.resemblance;
        for (name, v) in [
            ("mean_wd", r.mean_wd),
            ("mean_wd_scaled", r.mean_wd_scaled),
            ("mean_jsd", r.mean_jsd),
            ("mean_chi2_p", r.mean_chi2_p),
        ] {
            if let Some(v) = v {
                out.push((name.into(), v));
            }
        }
        for row in &self.utility.rows {
            for (side, outcome) in [("synthetic", &row.synthetic), ("real", &row.real)] {
                if let Some((acc, f1, auc)) = outcome.scores() {
                    out.push((format!("utility.{}.{side}.accuracy", row.family), acc));
                    out.push((format!("utility.{}.{side}.f1_weighted", row.family), f1));
                    out.push((format!("utility.{}.{side}.aucroc", row.family), auc));
                }
            }
        }
        out
    }
}

/// One (dataset, generator, repetition) triple. Exactly one of `metrics`
/// and `error` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub generator: String,
    pub repetition: usize,
    pub seeds: CellSeeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<CellMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub generator: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Standard error from the n-1 sample deviation; null for a single value.
    pub sem: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub tool_version: String,
    pub config: BenchmarkConfig,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
}

/// Mean and standard error of the mean.
pub fn mean_sem(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sem = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Some((mean, sem))
}

/// (dataset, generator) with the values of each metric.
type MetricGroup = ((String, String), Vec<(String, Vec<f64>)>);

/// Aggregates successful cells per (dataset, generator, metric), keeping
/// the order in which groups and metrics first appear.
pub fn aggregate(cells: &[CellResult]) -> Vec<Aggregate> {
    let mut groups: Vec<MetricGroup> = Vec::new();
    for cell in cells {
        let Some(m) = &cell.metrics else { continue };
        let key = (cell.dataset.clone(), cell.generator.clone());
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let metrics = &mut groups[idx].1;
        for (name, v) in m.flatten() {
            match metrics.iter_mut().find(|(n, _)| *n == name) {
                Some((_, vals)) => vals.push(v),
                None => metrics.push((name, vec![v])),
            }
        }
    }
    groups
        .into_iter()
        .flat_map(|((dataset, generator), metrics)| {
            metrics.into_iter().map(move |(metric, vals)| {
                let (mean, sem) = mean_sem(&vals).expect("at least one value");
                Aggregate { dataset: dataset.clone(), generator: generator.clone(), metric, n: vals.len(), mean, sem }
            })
        })
        .collect()
}

impl Report {
    pub fn new(config: BenchmarkConfig, cells: Vec<CellResult>) -> Self {
        let aggregates = aggregate(&cells);
        Report {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            cells,
            aggregates,
        }
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn from_json<R: Read>(source: R) -> Result<Self> {
        Ok(serde_json::from_reader(source)?)
    }

    pub fn write_json<W: Write>(&self, mut sink: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut sink, self)?;
        sink.write_all(b"\n")?;
        Ok(())
    }

    /// One row per (dataset, generator, repetition, metric, value); failed
    /// cells have no rows.
    pub fn write_cells_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["dataset", "generator", "repetition", "metric", "value"])?;
        for cell in &self.cells {
            let Some(m) = &cell.metrics else { continue };
            for (metric, v) in m.flatten() {
                w.write_record([&cell.dataset, &cell.generator, &cell.repetition.to_string(), &metric, &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregates_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["dataset", "generator", "metric", "mean", "sem"])?;
        for a in &self.aggregates {
            let sem = a.sem.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([&a.dataset, &a.generator, &a.metric, &a.mean.to_string(), &sem])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const REPORT_JSON: &str = "report.json";
pub const CELLS_CSV: &str = "cells.csv";
pub const AGGREGATES_CSV: &str = "aggregates.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| with_path(e, path))?))
}

/// Writes `report` into `dir` (created if missing) and returns the files written.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| with_path(e, dir))?;
    match format {
        ReportFormat::Json => {
            let path = dir.join(REPORT_JSON);
            let mut w = create(&path)?;
            report.write_json(&mut w)?;
            w.flush()?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let cells = dir.join(CELLS_CSV);
            let mut w = create(&cells)?;
            report.write_cells_csv(&mut w)?;
            w.flush()?;
            let aggregates = dir.join(AGGREGATES_CSV);
            let mut w = create(&aggregates)?;
            report.write_aggregates_csv(&mut w)?;
            w.flush()?;
            Ok(vec![cells, aggregates])
        }
    }
}
