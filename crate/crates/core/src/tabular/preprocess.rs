use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dataset::{ColumnData, Dataset};
use super::schema::{ColumnKind, Schema};

/// Fills missing cells: continuous columns with the mean of the observed
/// values, categorical columns with the modal category (ties go to the
/// category declared first).
pub fn impute_missing(ds: &Dataset) -> Result<Dataset> {
    let mut columns = Vec::with_capacity(ds.n_cols());
    for (spec, col) in ds.schema().columns().iter().zip(ds.columns()) {
        let missing = col.missing_count();
        if missing == 0 {
            columns.push(col.clone());
            continue;
        }
        if missing == col.len() {
            return Err(Error::InvalidInput(format!("column {:?} is entirely missing", spec.name)));
        }
        let filled = match col {
            ColumnData::Continuous(v) => {
                let observed: Vec<f64> = v.iter().flatten().copied().collect();
                let mean = observed.iter().sum::<f64>() / observed.len() as f64;
                ColumnData::Continuous(v.iter().map(|c| Some(c.unwrap_or(mean))).collect())
            }
            ColumnData::Categorical(v) => {
                let mut counts = vec![0usize; spec.categories.len()];
                for i in v.iter().flatten() {
                    counts[*i] += 1;
                }
                // first maximum wins
                let mode = counts
                    .iter()
                    .enumerate()
                    .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
                    .0;
                ColumnData::Categorical(v.iter().map(|c| Some(c.unwrap_or(mode))).collect())
            }
        };
        columns.push(filled);
    }
    Dataset::new(ds.schema().clone(), columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    Zscore,
    Minmax,
}

/// Per-continuous-column scaling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScaleParams {
    Zscore { mean: f64, sd: f64 },
    Minmax { min: f64, max: f64 },
}

impl ScaleParams {
    fn offset_and_divisor(&self) -> (f64, f64) {
        let (offset, spread) = match *self {
            ScaleParams::Zscore { mean, sd } => (mean, sd),
            ScaleParams::Minmax { min, max } => (min, max - min),
        };
        // zero spread maps the fitted constant to 0
        (offset, if spread > 0.0 { spread } else { 1.0 })
    }

    pub fn apply(&self, x: f64) -> f64 {
        let (o, d) = self.offset_and_divisor();
        (x - o) / d
    }

    pub fn invert(&self, z: f64) -> f64 {
        let (o, d) = self.offset_and_divisor();
        z * d + o
    }
}

/// Location of one original column inside an encoded matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub column: usize,
    pub start: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub matrix: Array2<f64>,
    pub column_map: Vec<ColumnSpan>,
    /// `Some` for continuous columns, `None` for categorical ones.
    pub scaling: Vec<Option<ScaleParams>>,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Fitted encoder: continuous columns scaled, categoricals one-hot in schema
/// category order. Can be fitted on one dataset and applied to another with
/// a compatible schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    schema: Schema,
    params: Vec<Option<ScaleParams>>,
    column_map: Vec<ColumnSpan>,
    categorical_weight: f64,
}

impl Encoder {
    pub fn fit(ds: &Dataset, scaling: Scaling) -> Result<Self> {
        if ds.has_missing() {
            return Err(Error::InvalidInput("cannot encode a dataset with missing cells".into()));
        }
        let mut params = Vec::with_capacity(ds.n_cols());
        let mut column_map = Vec::with_capacity(ds.n_cols());
        let mut start = 0;
        for (c, spec) in ds.schema().columns().iter().enumerate() {
            let width = spec.encoded_width();
            column_map.push(ColumnSpan { column: c, start, width });
            start += width;
            params.push(match spec.kind {
                ColumnKind::Categorical => None,
                ColumnKind::Continuous => {
                    let values = ds.continuous_values(c);
                    Some(fit_params(&values, scaling))
                }
            });
        }
        Ok(Self {
            schema: ds.schema().clone(),
            params,
            column_map,
            categorical_weight: 1.0,
        })
    }

    /// Scales every one-hot entry by `weight` (e.g. `1/√2` so that one
    /// category flip moves a row by Euclidean distance 1).
    pub fn with_categorical_weight(mut self, weight: f64) -> Self {
        self.categorical_weight = weight;
        self
    }

    pub fn width(&self) -> usize {
        self.column_map.iter().map(|s| s.width).sum()
    }

    pub fn column_map(&self) -> &[ColumnSpan] {
        &self.column_map
    }

    pub fn params(&self) -> &[Option<ScaleParams>] {
        &self.params
    }

    pub fn transform(&self, ds: &Dataset) -> Result<EncodedMatrix> {
        if !ds.schema().compatible_with(&self.schema) {
            return Err(Error::Schema("dataset schema differs from the fitted schema".into()));
        }
        if ds.has_missing() {
            return Err(Error::InvalidInput("cannot encode a dataset with missing cells".into()));
        }
        let mut matrix = Array2::zeros((ds.n_rows(), self.width()));
        for (span, (col, params)) in self.column_map.iter().zip(ds.columns().iter().zip(&self.params)) {
            match col {
                ColumnData::Continuous(v) => {
                    let p = params.expect("continuous column has scale params");
                    for (r, x) in v.iter().enumerate() {
                        matrix[[r, span.start]] = p.apply(x.expect("no missing cells"));
                    }
                }
                ColumnData::Categorical(v) => {
                    for (r, i) in v.iter().enumerate() {
                        matrix[[r, span.start + i.expect("no missing cells")]] = self.categorical_weight;
                    }
                }
            }
        }
        Ok(EncodedMatrix {
            matrix,
            column_map: self.column_map.clone(),
            scaling: self.params.clone(),
        })
    }

    /// Maps an encoded matrix back to a dataset; categorical blocks decode
    /// to their argmax.
    pub fn inverse(&self, matrix: &Array2<f64>) -> Result<Dataset> {
        if matrix.ncols() != self.width() {
            return Err(Error::Shape(format!("matrix has {} columns, encoder expects {}", matrix.ncols(), self.width())));
        }
        let columns = self
            .column_map
            .iter()
            .zip(&self.params)
            .map(|(span, params)| match params {
                Some(p) => ColumnData::Continuous(
                    matrix.column(span.start).iter().map(|&z| Some(p.invert(z))).collect(),
                ),
                None => ColumnData::Categorical(
                    matrix
                        .rows()
                        .into_iter()
                        .map(|row| Some(argmax(&row.as_slice().expect("standard layout")[span.start..span.start + span.width])))
                        .collect(),
                ),
            })
            .collect();
        Dataset::new(self.schema.clone(), columns)
    }
}

fn fit_params(values: &[f64], scaling: Scaling) -> ScaleParams {
    let n = values.len().max(1) as f64;
    match scaling {
        Scaling::Zscore => {
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            ScaleParams::Zscore { mean, sd: var.sqrt() }
        }
        Scaling::Minmax => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if values.is_empty() {
                ScaleParams::Minmax { min: 0.0, max: 0.0 }
            } else {
                ScaleParams::Minmax { min, max }
            }
        }
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits an encoder on `ds` and encodes it.
pub fn encode(ds: &Dataset, scaling: Scaling) -> Result<EncodedMatrix> {
    Encoder::fit(ds, scaling)?.transform(ds)
}
