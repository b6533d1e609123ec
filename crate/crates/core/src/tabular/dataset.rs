use crate::error::{Error, Result};

use super::schema::{ColumnKind, Schema};

/// Column-major cell storage. Categorical cells hold the index of their label
/// in the column's category list; `None` is the missing marker.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<usize>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.iter().filter(|c| c.is_none()).count(),
            ColumnData::Categorical(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect())
            }
        }
    }
}

/// A single cell, used for row-wise construction and access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(usize),
    Missing,
}

/// Schema-typed table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<ColumnData>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Shape(format!(
                "{} columns supplied for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, ColumnData::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Shape(format!("column {:?} has {} rows, expected {n_rows}", spec.name, col.len())));
            }
            match (spec.kind, col) {
                (ColumnKind::Continuous, ColumnData::Continuous(v)) => {
                    if let Some(row) = v.iter().position(|c| matches!(c, Some(x) if !x.is_finite())) {
                        return Err(Error::Parse {
                            row: row + 1,
                            column: spec.name.clone(),
                            message: "non-finite value".into(),
                        });
                    }
                }
                (ColumnKind::Categorical, ColumnData::Categorical(v)) => {
                    let k = spec.categories.len();
                    if let Some(row) = v.iter().position(|c| matches!(c, Some(i) if *i >= k)) {
                        return Err(Error::Parse {
                            row: row + 1,
                            column: spec.name.clone(),
                            message: "category index out of range".into(),
                        });
                    }
                }
                _ => {
                    return Err(Error::Shape(format!("column {:?} storage does not match its kind", spec.name)))
                }
            }
        }
        Ok(Self { schema, columns, n_rows })
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Continuous => ColumnData::Continuous(Vec::new()),
                ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
            })
            .collect();
        Self { schema, columns, n_rows: 0 }
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<Cell>]) -> Result<Self> {
        let mut columns: Vec<ColumnData> = Self::empty(schema.clone()).columns;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Shape(format!("row {} has {} cells, expected {}", r + 1, row.len(), schema.len())));
            }
            for (c, cell) in row.iter().enumerate() {
                match (&mut columns[c], cell) {
                    (ColumnData::Continuous(v), Cell::Num(x)) => v.push(Some(*x)),
                    (ColumnData::Continuous(v), Cell::Missing) => v.push(None),
                    (ColumnData::Categorical(v), Cell::Cat(i)) => v.push(Some(*i)),
                    (ColumnData::Categorical(v), Cell::Missing) => v.push(None),
                    _ => {
                        return Err(Error::Parse {
                            row: r + 1,
                            column: schema.column(c).name.clone(),
                            message: "cell type does not match column kind".into(),
                        })
                    }
                }
            }
        }
        Self::new(schema, columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Replaces the schema with a compatible one (e.g. a different target flag).
    pub fn with_schema(mut self, schema: Schema) -> Result<Self> {
        if !schema.compatible_with(&self.schema) {
            return Err(Error::Schema("replacement schema is not compatible".into()));
        }
        self.schema = schema;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &ColumnData {
        &self.columns[idx]
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        match &self.columns[col] {
            ColumnData::Continuous(v) => v[row].map_or(Cell::Missing, Cell::Num),
            ColumnData::Categorical(v) => v[row].map_or(Cell::Missing, Cell::Cat),
        }
    }

    pub fn row(&self, row: usize) -> Vec<Cell> {
        (0..self.n_cols()).map(|c| self.cell(row, c)).collect()
    }

    /// Label of a categorical cell, `None` when missing or continuous.
    pub fn label(&self, row: usize, col: usize) -> Option<&str> {
        match &self.columns[col] {
            ColumnData::Categorical(v) => v[row].map(|i| self.schema.column(col).categories[i].as_str()),
            ColumnData::Continuous(_) => None,
        }
    }

    /// Non-missing values of a continuous column.
    pub fn continuous_values(&self, col: usize) -> Vec<f64> {
        match &self.columns[col] {
            ColumnData::Continuous(v) => v.iter().flatten().copied().collect(),
            ColumnData::Categorical(_) => Vec::new(),
        }
    }

    /// Per-category counts of a categorical column (missing cells skipped).
    pub fn category_counts(&self, col: usize) -> Vec<usize> {
        let k = self.schema.column(col).categories.len();
        let mut counts = vec![0; k];
        if let ColumnData::Categorical(v) = &self.columns[col] {
            for i in v.iter().flatten() {
                counts[*i] += 1;
            }
        }
        counts
    }

    /// Category indices of a fully observed categorical column.
    pub fn labels(&self, col: usize) -> Result<Vec<usize>> {
        match &self.columns[col] {
            ColumnData::Categorical(v) => v
                .iter()
                .enumerate()
                .map(|(r, c)| {
                    c.ok_or_else(|| Error::InvalidInput(format!(
                        "missing label in column {:?} at row {}",
                        self.schema.column(col).name,
                        r + 1
                    )))
                })
                .collect(),
            ColumnData::Continuous(_) => Err(Error::InvalidInput(format!(
                "column {:?} is not categorical",
                self.schema.column(col).name
            ))),
        }
    }

    pub fn missing_count(&self) -> usize {
        self.columns.iter().map(ColumnData::missing_count).sum()
    }

    pub fn has_missing(&self) -> bool {
        self.missing_count() > 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Drops one column, returning the remaining table.
    pub fn drop_column(&self, col: usize) -> Result<Dataset> {
        let mut specs = self.schema.columns().to_vec();
        specs.remove(col);
        let mut columns = self.columns.clone();
        columns.remove(col);
        Dataset::new(Schema::new(specs)?, columns)
    }

    /// Appends the rows of `other`, which must have a compatible schema.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if !self.schema.compatible_with(&other.schema) {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| match (a, b) {
                (ColumnData::Continuous(x), ColumnData::Continuous(y)) => {
                    ColumnData::Continuous(x.iter().chain(y).copied().collect())
                }
                (ColumnData::Categorical(x), ColumnData::Categorical(y)) => {
                    ColumnData::Categorical(x.iter().chain(y).copied().collect())
                }
                _ => unreachable!("compatible schemas share column kinds"),
            })
            .collect();
        Ok(Dataset {
            schema: self.schema.clone(),
            columns,
            n_rows: self.n_rows + other.n_rows,
        })
    }
}
