//! Conditioning vectors over categorical columns and training-by-sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tabular::{ColumnKind, Dataset};

/// One categorical column's share of the conditioning vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondBlock {
    /// Schema index of the column.
    pub column: usize,
    /// Offset of the block inside the conditioning vector.
    pub offset: usize,
    pub counts: Vec<usize>,
}

impl CondBlock {
    /// Training distribution: proportional to `ln(1 + count)`.
    pub fn log_frequency_probs(&self) -> Vec<f64> {
        let w: Vec<f64> = self.counts.iter().map(|&c| (c as f64).ln_1p()).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    /// Generation distribution: the observed category frequencies.
    pub fn frequency_probs(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

/// A drawn condition: block index, category, and the one-hot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub block: usize,
    pub category: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSampler {
    pub blocks: Vec<CondBlock>,
    pub width: usize,
    /// Training rows holding each category, per block.
    #[serde(skip)]
    rows: Vec<Vec<Vec<usize>>>,
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum: take the last reachable entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl CondSampler {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut rows = Vec::new();
        let mut offset = 0;
        for (c, spec) in ds.schema().columns().iter().enumerate() {
            if spec.kind != ColumnKind::Categorical {
                continue;
            }
            let labels = ds.labels(c)?;
            let mut by_cat = vec![Vec::new(); spec.categories.len()];
            for (i, &l) in labels.iter().enumerate() {
                by_cat[l].push(i);
            }
            let counts: Vec<usize> = by_cat.iter().map(Vec::len).collect();
            if counts.iter().all(|&n| n == 0) {
                return invalid(format!("column {:?} has no observed categories", spec.name));
            }
            blocks.push(CondBlock { column: c, offset, counts });
            rows.push(by_cat);
            offset += spec.categories.len();
        }
        Ok(CondSampler { blocks, width: offset, rows })
    }

    /// True when there is no categorical column to condition on.
    pub fn is_unconditional(&self) -> bool {
        self.blocks.is_empty()
    }

    fn condition<R: Rng + ?Sized>(&self, rng: &mut R, training: bool) -> Option<Condition> {
        if self.is_unconditional() {
            return None;
        }
        let block = rng.random_range(0..self.blocks.len());
        let b = &self.blocks[block];
        let probs = if training { b.log_frequency_probs() } else { b.frequency_probs() };
        let category = draw(&probs, rng);
        let mut vector = vec![0.0; self.width];
        vector[b.offset + category] = 1.0;
        Some(Condition { block, category, vector })
    }

    /// Picks a categorical column uniformly, then a category with
    /// probability proportional to `ln(1 + count)`.
    pub fn sample_training<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Condition> {
        self.condition(rng, true)
    }

    /// Like [`CondSampler::sample_training`] but with observed frequencies.
    pub fn sample_generation<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Condition> {
        self.condition(rng, false)
    }

    /// A uniformly chosen training row holding the condition's category.
    pub fn matching_row<R: Rng + ?Sized>(&self, cond: &Condition, rng: &mut R) -> usize {
        let rows = &self.rows[cond.block][cond.category];
        rows[rng.random_range(0..rows.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded;
    use crate::tabular::{ColumnData, ColumnSpec, Schema};

    fn binary(a: usize, b: usize) -> Dataset {
        let schema = Schema::new(vec![ColumnSpec::categorical("g", ["A", "B"])]).unwrap();
        let v = (0..a + b).map(|i| Some(usize::from(i >= a))).collect();
        Dataset::new(schema, vec![ColumnData::Categorical(v)]).unwrap()
    }

    #[test]
    fn log_frequency_probabilities() {
        let s = CondSampler::fit(&binary(99, 1)).unwrap();
        let p = s.blocks[0].log_frequency_probs();
        let expect = 100f64.ln() / (100f64.ln() + 2f64.ln());
        assert!((p[0] - expect).abs() < 1e-15);
        assert!((p[0] - 0.869).abs() < 5e-4);
        assert_eq!(CondSampler::fit(&binary(50, 50)).unwrap().blocks[0].log_frequency_probs(), vec![0.5, 0.5]);
    }

    #[test]
    fn matching_rows_hold_the_category() {
        let ds = binary(7, 3);
        let s = CondSampler::fit(&ds).unwrap();
        let mut rng = seeded(1);
        for _ in 0..200 {
            let c = s.sample_training(&mut rng).unwrap();
            assert_eq!(c.vector.iter().sum::<f64>(), 1.0);
            let row = s.matching_row(&c, &mut rng);
            assert_eq!(ds.labels(0).unwrap()[row], c.category);
        }
    }

    #[test]
    fn no_categorical_columns_is_unconditional() {
        let schema = Schema::new(vec![ColumnSpec::continuous("x")]).unwrap();
        let ds = Dataset::new(schema, vec![ColumnData::Continuous(vec![Some(1.0)])]).unwrap();
        let s = CondSampler::fit(&ds).unwrap();
        assert!(s.is_unconditional());
        assert_eq!(s.width, 0);
        assert!(s.sample_training(&mut seeded(0)).is_none());
    }

    #[test]
    fn unseen_categories_are_never_drawn() {
        let schema = Schema::new(vec![ColumnSpec::categorical("g", ["A", "B", "C"])]).unwrap();
        let ds = Dataset::new(schema, vec![ColumnData::Categorical(vec![Some(0), Some(2)])]).unwrap();
        let s = CondSampler::fit(&ds).unwrap();
        let mut rng = seeded(3);
        assert!((0..500).all(|_| s.sample_training(&mut rng).unwrap().category != 1));
    }
}
