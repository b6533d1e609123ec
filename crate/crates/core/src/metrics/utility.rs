//! Classifier-based scores: real-vs-synthetic detection, out-of-distribution
//! AUCROC of synthetic-trained models on real data, and the composite
//! integrity score.

use ndarray::{concatenate, Array2, Axis};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train, Family};
use crate::error::{invalid, Error, Result};
use crate::numeric::RngStream;
use crate::tabular::{ColumnKind, Dataset, Encoder, Scaling};

use super::classification::{aucroc_binary, aucroc_detail};
use super::fidelity::shared_encoding;

/// `(quality + ood_aucroc + (1 - detection)) / 3`.
pub fn sdis(quality: f64, ood_aucroc: f64, detection: f64) -> f64 {
    (quality + ood_aucroc + (1.0 - detection)) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityScores {
    pub detection: f64,
    pub ood_aucroc: f64,
    pub sdis: f64,
}

impl UtilityScores {
    pub fn new(quality: f64, detection: f64, ood_aucroc: f64) -> Self {
        UtilityScores { detection, ood_aucroc, sdis: sdis(quality, ood_aucroc, detection) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScore {
    pub family: Family,
    pub aucroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detection: f64,
    pub per_classifier: Vec<ClassifierScore>,
    /// Rows per side after balancing.
    pub rows_per_side: usize,
}

pub const DETECTION_FAMILIES: [Family; 3] = [Family::Gbt, Family::Mlp, Family::GmmDensity];
pub const OOD_FAMILIES: [Family; 3] = [Family::Gbt, Family::Mlp, Family::Linear];
pub const MIN_DETECTION_ROWS: usize = 20;

/// Mean test AUCROC of discriminators separating real (0) from synthetic (1)
/// rows. The larger side is downsampled to the smaller one and the pooled
/// rows are split 80/20 within each label.
pub fn detection(real: &Dataset, syn: &Dataset, seed: u64) -> Result<DetectionReport> {
    let n = real.n_rows().min(syn.n_rows());
    if n < MIN_DETECTION_ROWS {
        return invalid(format!("detection needs at least {MIN_DETECTION_ROWS} rows per side, got {n}"));
    }
    let stream = RngStream::new(seed).child("detection");
    let (r, s) = shared_encoding(real, syn)?;
    let downsample = |m: Array2<f64>, label: &str| -> Array2<f64> {
        if m.nrows() == n {
            return m;
        }
        let mut rows = sample(&mut stream.child("balance").child(label).rng(), m.nrows(), n).into_vec();
        rows.sort_unstable();
        m.select(Axis(0), &rows)
    };
    let r = downsample(r, "real");
    let s = downsample(s, "synthetic");
    let x = concatenate(Axis(0), &[r.view(), s.view()]).expect("equal widths");
    let y: Vec<usize> = (0..2 * n).map(|i| usize::from(i >= n)).collect();

    let n_train = ((0.8 * n as f64).round() as usize).clamp(1, n - 1);
    let mut train_rows = Vec::with_capacity(2 * n_train);
    let mut test_rows = Vec::with_capacity(2 * (n - n_train));
    for (side, offset) in [("real", 0), ("synthetic", n)] {
        let mut idx: Vec<usize> = (offset..offset + n).collect();
        idx.shuffle(&mut stream.child("split").child(side).rng());
        train_rows.extend_from_slice(&idx[..n_train]);
        test_rows.extend_from_slice(&idx[n_train..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    let xtr = x.select(Axis(0), &train_rows);
    let xte = x.select(Axis(0), &test_rows);
    let ytr: Vec<usize> = train_rows.iter().map(|&i| y[i]).collect();
    let yte: Vec<bool> = test_rows.iter().map(|&i| y[i] == 1).collect();

    let per_classifier = DETECTION_FAMILIES
        .iter()
        .map(|&family| {
            let model = train(&family.default_spec(), xtr.view(), &ytr, stream.child(family).derived_seed())?;
            let proba = model.predict_proba(xte.view())?;
            Ok(ClassifierScore { family, aucroc: aucroc_binary(&yte, &proba.column(1).to_vec())? })
        })
        .collect::<Result<Vec<_>>>()?;
    let detection = per_classifier.iter().map(|c| c.aucroc).sum::<f64>() / per_classifier.len() as f64;
    Ok(DetectionReport { detection, per_classifier, rows_per_side: n })
}

/// Features and integer labels of a classification task on `ds`.
#[derive(Debug, Clone)]
pub struct Task {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_labels: usize,
}

/// Encodes the non-target columns of `train_ds` and `test_ds` with z-scores
/// fitted on `train_ds`; labels are the target's category indices.
pub fn prepare_task(train_ds: &Dataset, test_ds: &Dataset, target: &str) -> Result<(Task, Task)> {
    if !train_ds.schema().compatible_with(test_ds.schema()) {
        return Err(Error::Schema("training and test schemas differ".into()));
    }
    let t = train_ds
        .schema()
        .index_of(target)
        .ok_or_else(|| Error::Schema(format!("target column {target:?} not in schema")))?;
    let spec = train_ds.schema().column(t);
    if spec.kind != ColumnKind::Categorical {
        return Err(Error::Schema(format!("target column {target:?} must be categorical")));
    }
    let n_labels = spec.categories.len();
    let ftr = train_ds.drop_column(t)?;
    let fte = test_ds.drop_column(t)?;
    let encode = |enc: Option<&Encoder>, ds: &Dataset| -> Result<Array2<f64>> {
        match enc {
            Some(e) => Ok(e.transform(ds)?.matrix),
            None => Ok(Array2::zeros((ds.n_rows(), 0))),
        }
    };
    let enc = if ftr.n_cols() > 0 { Some(Encoder::fit(&ftr, Scaling::Zscore)?) } else { None };
    Ok((
        Task { features: encode(enc.as_ref(), &ftr)?, labels: train_ds.labels(t)?, n_labels },
        Task { features: encode(enc.as_ref(), &fte)?, labels: test_ds.labels(t)?, n_labels },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub ood_aucroc: f64,
    pub per_classifier: Vec<ClassifierScore>,
    /// Target categories present in the real test data but never generated;
    /// they are scored with constant (uninformative) probabilities.
    pub degenerate_classes: Vec<String>,
}

/// Mean AUCROC on real test rows of {gbt, mlp, linear} trained on synthetic
/// rows to predict `target`.
pub fn ood_aucroc(syn: &Dataset, real_test: &Dataset, target: &str, seed: u64) -> Result<OodReport> {
    let (tr, te) = prepare_task(syn, real_test, target)?;
    let t = syn.schema().index_of(target).expect("checked by prepare_task");
    let categories = &syn.schema().column(t).categories;
    let mut seen = vec![false; tr.n_labels];
    tr.labels.iter().for_each(|&c| seen[c] = true);
    let mut in_test = vec![false; te.n_labels];
    te.labels.iter().for_each(|&c| in_test[c] = true);
    if in_test.iter().filter(|b| **b).count() < 2 {
        return invalid("the real test data holds a single target class");
    }
    let degenerate_classes: Vec<String> =
        (0..tr.n_labels).filter(|&c| in_test[c] && !seen[c]).map(|c| categories[c].clone()).collect();

    let stream = RngStream::new(seed).child("ood");
    let per_classifier = OOD_FAMILIES
        .iter()
        .map(|&family| {
            let aucroc = if seen.iter().filter(|b| **b).count() < 2 {
                // nothing to learn from: every class gets the same score
                0.5
            } else {
                let model = train(&family.default_spec(), tr.features.view(), &tr.labels, stream.child(family).derived_seed())?;
                let proba = model.predict_proba_full(te.features.view(), te.n_labels)?;
                aucroc_detail(&te.labels, proba.view())?.value
            };
            Ok(ClassifierScore { family, aucroc })
        })
        .collect::<Result<Vec<_>>>()?;
    let ood_aucroc = per_classifier.iter().map(|c| c.aucroc).sum::<f64>() / per_classifier.len() as f64;
    Ok(OodReport { ood_aucroc, per_classifier, degenerate_classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sdis_reference_cells() {
        assert_eq!(sdis(1.0, 1.0, 0.0), 1.0);
        assert!((sdis(0.6403, 0.5335, 0.6454) - 0.5095).abs() < 5e-5);
        assert!((sdis(0.5707, -0.0088, 0.5413) - 0.3402).abs() < 5e-5);
    }

    #[test]
    fn scores_satisfy_identity() {
        let u = UtilityScores::new(0.7, 0.55, 0.8);
        assert!((3.0 * u.sdis - 0.7 - 0.8 - (1.0 - 0.55)).abs() < 1e-12);
    }
}
