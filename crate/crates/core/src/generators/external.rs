//! Ingestion of synthetic data produced by tools outside this crate.

use std::io::Read;

use crate::error::{Error, Result};
use crate::tabular::{read_csv, Cell, Dataset, ReadOptions, Schema};

/// A validated external synthetic dataset and the generator it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSynthetic {
    pub dataset: Dataset,
    /// `external:<name>`.
    pub generator: String,
}

/// Reads an externally generated CSV against `schema`.
///
/// The generator name comes from `name` when given, otherwise from a
/// `# generator: <name>` comment line, otherwise `unnamed`. Columns may
/// appear in any order. Every row that violates the schema is counted and
/// the first violation is reported.
pub fn load_external_synthetic<R: Read>(source: R, schema: &Schema, name: Option<&str>) -> Result<ExternalSynthetic> {
    let outcome = read_csv(source, schema, ReadOptions { comments: true, collect_errors: true })?;
    if let Some(first) = outcome.errors.first() {
        return Err(Error::SchemaViolation { count: outcome.errors.len(), first: first.to_string() });
    }
    let dataset = outcome.dataset.expect("dataset present when no errors");
    if dataset.has_missing() {
        return Err(Error::SchemaViolation {
            count: (0..dataset.n_rows()).filter(|&i| dataset.row(i).iter().any(|c| matches!(c, Cell::Missing))).count(),
            first: "synthetic rows may not contain missing cells".into(),
        });
    }
    let from_metadata = outcome.comment_lines.iter().find_map(|line| {
        let (key, value) = line.split_once(':')?;
        (key.trim() == "generator").then(|| value.trim().to_string())
    });
    let tag = name.map(str::to_string).or(from_metadata).filter(|s| !s.is_empty()).unwrap_or_else(|| "unnamed".into());
    Ok(ExternalSynthetic { dataset, generator: format!("external:{}", tag.to_lowercase()) })
}
