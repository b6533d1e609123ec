//! Calibration generators that need no training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::RngStream;
use crate::tabular::{ColumnData, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Whole training rows drawn with replacement.
    Bootstrap,
    /// Every column drawn independently from its own non-missing cells.
    Independence,
}

pub fn baseline_fit_sample(kind: BaselineKind, train: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    if train.n_rows() == 0 {
        return invalid("baseline needs a non-empty training set");
    }
    let stream = RngStream::new(seed).child("baseline");
    match kind {
        BaselineKind::Bootstrap => {
            let mut rng = stream.child("bootstrap").rng();
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..train.n_rows())).collect();
            Ok(train.select_rows(&rows))
        }
        BaselineKind::Independence => {
            let columns = train
                .columns()
                .iter()
                .enumerate()
                .map(|(c, col)| {
                    let mut rng = stream.child("independence").child(c).rng();
                    let name = &train.schema().column(c).name;
                    fn pick<T: Copy>(pool: Vec<T>, n: usize, rng: &mut impl Rng, name: &str) -> Result<Vec<Option<T>>> {
                        if pool.is_empty() {
                            return invalid(format!("column {name:?} has no observed values"));
                        }
                        Ok((0..n).map(|_| Some(pool[rng.random_range(0..pool.len())])).collect())
                    }
                    Ok(match col {
                        ColumnData::Continuous(v) => {
                            ColumnData::Continuous(pick(v.iter().flatten().copied().collect(), n, &mut rng, name)?)
                        }
                        ColumnData::Categorical(v) => {
                            ColumnData::Categorical(pick(v.iter().flatten().copied().collect(), n, &mut rng, name)?)
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::new(train.schema().clone(), columns)
        }
    }
}
