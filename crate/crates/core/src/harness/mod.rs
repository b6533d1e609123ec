//! End-to-end benchmark: configuration, per-cell evaluation, the utility
//! experiment, t-SNE projection and report emission.

mod benchmark;
mod config;
mod project;
mod report;
mod tsne;
mod utility;

pub use benchmark::{cell_seeds, run_benchmark, TRAIN_FRACTION};
pub use config::{
    read_dataset, read_schema, BenchmarkConfig, DatasetEntry, FamilyGrid, GeneratorEntry, GeneratorModel,
    UTILITY_FAMILIES,
};
pub use project::{project_datasets, Projection};
pub use report::{
    aggregate, emit_report, mean_sem, Aggregate, CellMetrics, CellResult, CellSeeds, Report, ReportFormat, Timings,
    AGGREGATES_CSV, CELLS_CSV, FORMAT_VERSION, REPORT_JSON,
};
pub use tsne::{tsne_project, TsneConfig, TsneResult};
pub use utility::{utility_experiment, FitOutcome, UtilityRow, UtilityTable, SYNTHETIC_TRAIN_FRACTION};
