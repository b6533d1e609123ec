//! Stratified k-fold grid search with an AUCROC objective.

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::aucroc;
use crate::numeric::RngStream;

use super::model::train;
use super::spec::{ClassifierSpec, Family, ParamGrid};

/// Fold index for every row: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return invalid("cross-validation needs at least two folds");
    }
    let n_labels = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut assignment = vec![0; y.len()];
    let stream = RngStream::new(seed).child("folds");
    for c in 0..n_labels {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < folds {
            return invalid(format!("class {c} has {} rows, fewer than {folds} folds", rows.len()));
        }
        rows.shuffle(&mut stream.child(c).rng());
        for (j, &r) in rows.iter().enumerate() {
            assignment[r] = j % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ClassifierSpec,
    pub best_score: f64,
    /// Mean cross-validated AUCROC of every candidate, in enumeration order.
    pub scores: Vec<(ClassifierSpec, f64)>,
}

/// Cross-validated search over `grid`; the highest mean AUCROC wins and
/// ties go to the earlier candidate.
pub fn grid_search(
    family: Family,
    grid: &ParamGrid,
    x: ArrayView2<f64>,
    y: &[usize],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} feature rows but {} labels", x.nrows(), y.len())));
    }
    let specs = grid.specs(family)?;
    let assignment = stratified_folds(y, folds, seed)?;
    let n_labels = y.iter().copied().max().map_or(0, |m| m + 1);
    let split: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| (0..y.len()).partition(|&i| assignment[i] != f))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|s| (0..folds).map(move |f| (s, f))).collect();
    let fold_scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, f)| {
            let (tr, va) = &split[f];
            let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
            let yva: Vec<usize> = va.iter().map(|&i| y[i]).collect();
            let fold_seed = RngStream::new(seed).child("fit").child(f).derived_seed();
            let model = train(&specs[s], x.select(Axis(0), tr).view(), &ytr, fold_seed)?;
            let proba = model.predict_proba_full(x.select(Axis(0), va).view(), n_labels)?;
            aucroc(&yva, proba.view())
        })
        .collect::<Result<_>>()?;

    let scores: Vec<(ClassifierSpec, f64)> = specs
        .into_iter()
        .enumerate()
        .map(|(s, spec)| (spec, fold_scores[s * folds..(s + 1) * folds].iter().sum::<f64>() / folds as f64))
        .collect();
    let mut best = 0;
    for (i, (_, score)) in scores.iter().enumerate() {
        if *score > scores[best].1 {
            best = i;
        }
    }
    Ok(GridSearchResult { best: scores[best].0.clone(), best_score: scores[best].1, scores })
}
