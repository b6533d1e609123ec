//! Schema-aware tabular data: CSV I/O, imputation, encoding and sampling.

mod csv_io;
mod dataset;
mod preprocess;
mod sampling;
mod schema;

pub(crate) use csv_io::{read_csv, ReadOptions};
pub(crate) use preprocess::argmax;

pub use csv_io::{format_significant, load_csv, write_csv, MISSING_MARKERS};
pub use dataset::{Cell, ColumnData, Dataset};
pub use preprocess::{encode, impute_missing, ColumnSpan, EncodedMatrix, Encoder, ScaleParams, Scaling};
pub use sampling::{sample_fraction, split};
pub use schema::{ColumnKind, ColumnSpec, Schema};
