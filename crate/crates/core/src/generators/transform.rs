//! Row representation used by the conditional GAN: per continuous column an
//! offset (tanh head) followed by a mode one-hot (softmax head); per
//! categorical column a one-hot block (softmax head).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngStream;
use crate::tabular::{argmax, ColumnData, ColumnKind, Dataset, Schema};

use super::mode::{fit_mode_normalizer, ModeNormalizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Tanh,
    Softmax,
}

/// A contiguous block of generator outputs sharing one activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpan {
    pub start: usize,
    pub width: usize,
    pub head: Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Continuous { normalizer: ModeNormalizer },
    Categorical { n_categories: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTransformer {
    pub columns: Vec<ColumnTransform>,
}

impl DataTransformer {
    pub fn fit(ds: &Dataset, max_modes: usize, stream: &RngStream) -> Result<Self> {
        if ds.has_missing() {
            return Err(Error::InvalidInput("generator training data has missing cells; impute first".into()));
        }
        let columns = ds
            .schema()
            .columns()
            .iter()
            .enumerate()
            .map(|(c, spec)| match spec.kind {
                ColumnKind::Continuous => {
                    let values = ds.continuous_values(c);
                    let normalizer = fit_mode_normalizer(&values, max_modes, stream.child(c).derived_seed())?;
                    Ok(ColumnTransform::Continuous { normalizer })
                }
                ColumnKind::Categorical => Ok(ColumnTransform::Categorical { n_categories: spec.categories.len() }),
            })
            .collect::<Result<_>>()?;
        Ok(DataTransformer { columns })
    }

    pub fn spans(&self) -> Vec<OutputSpan> {
        let mut spans = Vec::new();
        let mut at = 0;
        for col in &self.columns {
            match col {
                ColumnTransform::Continuous { normalizer } => {
                    spans.push(OutputSpan { start: at, width: 1, head: Head::Tanh });
                    spans.push(OutputSpan { start: at + 1, width: normalizer.n_modes(), head: Head::Softmax });
                    at += 1 + normalizer.n_modes();
                }
                ColumnTransform::Categorical { n_categories } => {
                    spans.push(OutputSpan { start: at, width: *n_categories, head: Head::Softmax });
                    at += n_categories;
                }
            }
        }
        spans
    }

    pub fn width(&self) -> usize {
        self.spans().last().map_or(0, |s| s.start + s.width)
    }

    /// Start of each column's block in the representation.
    pub fn column_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.columns.len());
        let mut at = 0;
        for col in &self.columns {
            offsets.push(at);
            at += match col {
                ColumnTransform::Continuous { normalizer } => 1 + normalizer.n_modes(),
                ColumnTransform::Categorical { n_categories } => *n_categories,
            };
        }
        offsets
    }

    /// Encodes rows; each continuous value draws its mode from `stream`.
    pub fn transform(&self, ds: &Dataset, stream: &RngStream) -> Result<Array2<f64>> {
        if ds.has_missing() {
            return Err(Error::InvalidInput("cannot transform rows with missing cells".into()));
        }
        let mut out = Array2::<f64>::zeros((ds.n_rows(), self.width()));
        for ((c, col), offset) in self.columns.iter().enumerate().zip(self.column_offsets()) {
            match (col, ds.column(c)) {
                (ColumnTransform::Continuous { normalizer }, ColumnData::Continuous(values)) => {
                    let mut rng = stream.child(c).rng();
                    for (i, v) in values.iter().enumerate() {
                        let (alpha, mode) = normalizer.normalize(v.expect("no missing cells"), &mut rng)?;
                        out[[i, offset]] = alpha;
                        out[[i, offset + 1 + mode]] = 1.0;
                    }
                }
                (ColumnTransform::Categorical { .. }, ColumnData::Categorical(values)) => {
                    for (i, v) in values.iter().enumerate() {
                        out[[i, offset + v.expect("no missing cells")]] = 1.0;
                    }
                }
                _ => return Err(Error::Schema(format!("column {c} kind differs from the fitted transform"))),
            }
        }
        Ok(out)
    }

    /// Decodes activated generator output: offsets are clipped to `[-1, 1]`
    /// and every softmax block is resolved by argmax.
    pub fn inverse(&self, schema: &Schema, rows: ArrayView2<f64>) -> Result<Dataset> {
        if rows.ncols() != self.width() {
            return Err(Error::Shape(format!("expected width {}, got {}", self.width(), rows.ncols())));
        }
        let columns = self
            .columns
            .iter()
            .zip(self.column_offsets())
            .map(|(col, offset)| match col {
                ColumnTransform::Continuous { normalizer } => {
                    let k = normalizer.n_modes();
                    ColumnData::Continuous(
                        rows.rows()
                            .into_iter()
                            .map(|r| {
                                let modes = r.slice(ndarray::s![offset + 1..offset + 1 + k]).to_vec();
                                Some(normalizer.inverse(r[offset], argmax(&modes)))
                            })
                            .collect(),
                    )
                }
                ColumnTransform::Categorical { n_categories } => ColumnData::Categorical(
                    rows.rows()
                        .into_iter()
                        .map(|r| Some(argmax(&r.slice(ndarray::s![offset..offset + n_categories]).to_vec())))
                        .collect(),
                ),
            })
            .collect();
        Dataset::new(schema.clone(), columns)
    }
}
