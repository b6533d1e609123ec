//! Train-on-synthetic / test-on-real comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{grid_search, train, ClassifierSpec, Family, ParamGrid};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, aucroc_detail, f1_weighted, prepare_task, Task};
use crate::numeric::RngStream;
use crate::tabular::{sample_fraction, Dataset};

/// Share of the synthetic rows used for training.
pub const SYNTHETIC_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Scored {
        best: ClassifierSpec,
        /// Mean validation AUCROC of `best`; absent when a class was too
        /// rare for cross-validation and the first grid point was used.
        cv_aucroc: Option<f64>,
        accuracy: f64,
        f1_weighted: f64,
        aucroc: f64,
    },
    Degenerate {
        reason: String,
    },
}

impl FitOutcome {
    /// `(accuracy, f1_weighted, aucroc)` when scored.
    pub fn scores(&self) -> Option<(f64, f64, f64)> {
        match self {
            FitOutcome::Scored { accuracy, f1_weighted, aucroc, .. } => Some((*accuracy, *f1_weighted, *aucroc)),
            FitOutcome::Degenerate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub family: Family,
    pub synthetic: FitOutcome,
    pub real: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub synthetic_train_rows: usize,
    pub real_train_rows: usize,
    pub test_rows: usize,
    pub rows: Vec<UtilityRow>,
}

fn fit_and_score(family: Family, grid: &ParamGrid, train_task: &Task, test: &Task, folds: usize, seed: u64) -> Result<FitOutcome> {
    let mut counts = vec![0usize; train_task.n_labels];
    train_task.labels.iter().for_each(|&c| counts[c] += 1);
    let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if present.len() < 2 {
        return Ok(FitOutcome::Degenerate { reason: "training data holds a single target class".into() });
    }
    if test.labels.iter().all(|&c| Some(&c) == test.labels.first()) {
        return Ok(FitOutcome::Degenerate { reason: "test data holds a single target class".into() });
    }
    let stream = RngStream::new(seed).child(family);
    let folds = folds.min(present.iter().copied().min().unwrap_or(0));
    let (best, cv_aucroc) = if folds >= 2 {
        let search = grid_search(family, grid, train_task.features.view(), &train_task.labels, folds, stream.child("search").derived_seed())?;
        (search.best, Some(search.best_score))
    } else {
        (grid.specs(family)?.swap_remove(0), None)
    };
    let model = train(&best, train_task.features.view(), &train_task.labels, stream.child("final").derived_seed())?;
    let proba = model.predict_proba_full(test.features.view(), test.n_labels)?;
    let predicted = model.predict(test.features.view())?;
    Ok(FitOutcome::Scored {
        best,
        cv_aucroc,
        accuracy: accuracy(&test.labels, &predicted)?,
        f1_weighted: f1_weighted(&test.labels, &predicted)?,
        aucroc: aucroc_detail(&test.labels, proba.view())?.value,
    })
}

/// Grid-searches each family on 70% of `syn` and on `real_train`, and
/// scores both models on `real_test`.
pub fn utility_experiment(
    real_train: &Dataset,
    real_test: &Dataset,
    syn: &Dataset,
    target: &str,
    families: &[(Family, ParamGrid)],
    folds: usize,
    seed: u64,
) -> Result<UtilityTable> {
    if !syn.schema().compatible_with(real_train.schema()) {
        return Err(Error::Schema("synthetic and real schemas differ".into()));
    }
    let stream = RngStream::new(seed).child("utility");
    let syn_train = sample_fraction(syn, SYNTHETIC_TRAIN_FRACTION, stream.child("synthetic-subset").derived_seed())?;
    let (syn_task, syn_test) = prepare_task(&syn_train, real_test, target)?;
    let (real_task, real_test_task) = prepare_task(real_train, real_test, target)?;

    let jobs: Vec<(usize, bool)> = (0..families.len()).flat_map(|i| [(i, true), (i, false)]).collect();
    let outcomes: Vec<FitOutcome> = jobs
        .par_iter()
        .map(|&(i, synthetic)| {
            let (family, grid) = &families[i];
            let (tr, te, label) = if synthetic { (&syn_task, &syn_test, "synthetic") } else { (&real_task, &real_test_task, "real") };
            fit_and_score(*family, grid, tr, te, folds, stream.child(label).derived_seed())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut it = outcomes.into_iter();
    let rows = families
        .iter()
        .map(|(family, _)| UtilityRow { family: *family, synthetic: it.next().expect("paired"), real: it.next().expect("paired") })
        .collect();
    Ok(UtilityTable {
        synthetic_train_rows: syn_train.n_rows(),
        real_train_rows: real_train.n_rows(),
        test_rows: real_test.n_rows(),
        rows,
    })
}
