use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::dataset::{ColumnData, Dataset};
use super::schema::{ColumnKind, Schema};

/// Cell texts treated as the missing marker.
pub const MISSING_MARKERS: [&str; 3] = ["", "NaN", "nan"];

fn is_missing(text: &str) -> bool {
    MISSING_MARKERS.contains(&text.trim())
}

/// Formats a float with nine significant digits, without trailing zeros.
pub fn format_significant(value: f64) -> String {
    let rounded: f64 = format!("{value:.8e}").parse().expect("formatted float reparses");
    format!("{rounded}")
}

enum Parsed {
    Missing,
    Num(f64),
    Cat(usize),
    NewCat,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ReadOptions {
    /// Skip lines starting with `#`.
    pub comments: bool,
    /// Keep scanning after a bad row and report every offending row.
    pub collect_errors: bool,
}

pub(crate) struct ReadOutcome {
    pub dataset: Option<Dataset>,
    /// At most one error per offending row.
    pub errors: Vec<Error>,
    pub comment_lines: Vec<String>,
}

/// Reads a CSV whose header names the schema's columns in any order.
///
/// Empty cells and `NaN`/`nan` become missing. Unseen labels are appended to
/// open categorical columns and rejected for closed ones.
pub fn load_csv<R: Read>(source: R, schema: &Schema) -> Result<Dataset> {
    let outcome = read_csv(source, schema, ReadOptions::default())?;
    match outcome.errors.into_iter().next() {
        Some(err) => Err(err),
        None => Ok(outcome.dataset.expect("dataset present when no errors")),
    }
}

pub(crate) fn read_csv<R: Read>(source: R, schema: &Schema, opts: ReadOptions) -> Result<ReadOutcome> {
    let mut raw = String::new();
    let mut source = source;
    source.read_to_string(&mut raw)?;

    let mut comment_lines = Vec::new();
    let body: String = if opts.comments {
        let mut kept = String::with_capacity(raw.len());
        for line in raw.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                comment_lines.push(rest.trim().to_string());
            } else {
                kept.push_str(line);
                kept.push('\n');
            }
        }
        kept
    } else {
        raw
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let header = reader.headers()?.clone();

    // header position -> schema column
    let mut mapping = Vec::with_capacity(header.len());
    for name in header.iter() {
        let idx = schema
            .index_of(name)
            .ok_or_else(|| Error::Schema(format!("header column {name:?} not in schema")))?;
        if mapping.contains(&idx) {
            return Err(Error::Schema(format!("header repeats column {name:?}")));
        }
        mapping.push(idx);
    }
    if mapping.len() != schema.len() {
        let missing: Vec<_> = schema
            .names()
            .enumerate()
            .filter(|(i, _)| !mapping.contains(i))
            .map(|(_, n)| n.to_string())
            .collect();
        return Err(Error::Schema(format!("header is missing columns {missing:?}")));
    }

    let mut schema = schema.clone();
    let mut columns: Vec<ColumnData> = Dataset::empty(schema.clone()).columns().to_vec();
    let mut errors = Vec::new();

    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = match record {
            Ok(rec) => rec,
            Err(e) => {
                errors.push(Error::Parse { row, column: String::new(), message: e.to_string() });
                if opts.collect_errors {
                    continue;
                }
                break;
            }
        };
        let mut parsed = Vec::with_capacity(mapping.len());
        let mut row_error = None;
        for (pos, text) in record.iter().enumerate() {
            let col = mapping[pos];
            let spec = schema.column(col);
            let cell = if is_missing(text) {
                Ok(Parsed::Missing)
            } else {
                match spec.kind {
                    ColumnKind::Continuous => match text.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(Parsed::Num(v)),
                        _ => Err(format!("expected a number, found {text:?}")),
                    },
                    ColumnKind::Categorical => match spec.category_index(text) {
                        Some(i) => Ok(Parsed::Cat(i)),
                        None if spec.open => Ok(Parsed::NewCat),
                        None => Err(format!("unseen category {text:?}")),
                    },
                }
            };
            match cell {
                Ok(v) => parsed.push((col, v, text)),
                Err(message) => {
                    row_error = Some(Error::Parse { row, column: spec.name.clone(), message });
                    break;
                }
            }
        }
        if let Some(err) = row_error {
            errors.push(err);
            if opts.collect_errors {
                continue;
            }
            break;
        }
        for (col, value, text) in parsed {
            match (&mut columns[col], value) {
                (ColumnData::Continuous(v), Parsed::Num(x)) => v.push(Some(x)),
                (ColumnData::Continuous(v), _) => v.push(None),
                (ColumnData::Categorical(v), Parsed::Cat(i)) => v.push(Some(i)),
                (ColumnData::Categorical(v), Parsed::NewCat) => {
                    let spec = schema.column_mut(col);
                    let idx = spec.category_index(text).unwrap_or_else(|| {
                        spec.categories.push(text.to_string());
                        spec.categories.len() - 1
                    });
                    v.push(Some(idx));
                }
                (ColumnData::Categorical(v), _) => v.push(None),
            }
        }
    }

    let dataset = if errors.is_empty() {
        for spec in schema.columns() {
            if spec.is_categorical() && spec.categories.is_empty() {
                return Err(Error::Schema(format!(
                    "open categorical column {:?} has no observed categories",
                    spec.name
                )));
            }
        }
        Some(Dataset::new(schema, columns)?)
    } else {
        None
    };
    Ok(ReadOutcome { dataset, errors, comment_lines })
}

/// Writes a dataset as CSV in schema column order. Continuous cells carry
/// nine significant digits; missing cells are empty.
pub fn write_csv<W: Write>(ds: &Dataset, sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(sink);
    writer.write_record(ds.schema().names())?;
    let mut record = Vec::with_capacity(ds.n_cols());
    for r in 0..ds.n_rows() {
        record.clear();
        for (c, col) in ds.columns().iter().enumerate() {
            let text = match col {
                ColumnData::Continuous(v) => v[r].map(format_significant).unwrap_or_default(),
                ColumnData::Categorical(v) => v[r]
                    .map(|i| ds.schema().column(c).categories[i].clone())
                    .unwrap_or_default(),
            };
            record.push(text);
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
