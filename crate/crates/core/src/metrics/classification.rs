//! Classification scores: accuracy, support-weighted F1 and AUCROC.

use ndarray::ArrayView2;

use crate::error::{invalid, Error, Result};

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("label vectors differ in length ({a} vs {b})")));
    }
    if a == 0 {
        return invalid("label vectors are empty");
    }
    Ok(())
}

pub fn accuracy(y: &[usize], y_hat: &[usize]) -> Result<f64> {
    check_aligned(y.len(), y_hat.len())?;
    let correct = y.iter().zip(y_hat).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / y.len() as f64)
}

/// Support-weighted mean of per-class F1 over the classes present in `y`.
/// A class with zero precision or recall denominators scores 0.
pub fn f1_weighted(y: &[usize], y_hat: &[usize]) -> Result<f64> {
    check_aligned(y.len(), y_hat.len())?;
    let n_classes = y.iter().chain(y_hat).copied().max().unwrap_or(0) + 1;
    let mut tp = vec![0usize; n_classes];
    let mut pred = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    for (&t, &p) in y.iter().zip(y_hat) {
        support[t] += 1;
        pred[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let total = y.len() as f64;
    let score = (0..n_classes)
        .filter(|&c| support[c] > 0)
        .map(|c| {
            let f1 = if tp[c] == 0 {
                0.0
            } else {
                let precision = tp[c] as f64 / pred[c] as f64;
                let recall = tp[c] as f64 / support[c] as f64;
                2.0 * precision * recall / (precision + recall)
            };
            f1 * support[c] as f64 / total
        })
        .sum();
    Ok(score)
}

/// Binary AUCROC as the Mann-Whitney statistic with midranks, so tied
/// scores count one half.
pub fn aucroc_binary(positive: &[bool], scores: &[f64]) -> Result<f64> {
    check_aligned(positive.len(), scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score passed to AUCROC".into()));
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return invalid("AUCROC needs at least one positive and one negative");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // rank sums are accumulated doubled so ties stay integral
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end, doubled midrank = start + end + 1
        let mid2 = (start + end + 1) as u128;
        let pos_in_run = order[start..end].iter().filter(|&&i| positive[i]).count() as u128;
        rank_sum2 += mid2 * pos_in_run;
        start = end;
    }
    let n_pos_u = n_pos as u128;
    // doubled Mann-Whitney U
    let u2 = rank_sum2 - n_pos_u * (n_pos_u + 1);
    Ok(u2 as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// AUCROC from a probability matrix whose columns follow class indices.
///
/// Two columns give the standard binary AUCROC on column 1. Otherwise the
/// macro mean of one-vs-rest AUCROCs over classes with both positives and
/// negatives in `y` is returned.
pub fn aucroc(y: &[usize], proba: ArrayView2<f64>) -> Result<f64> {
    aucroc_detail(y, proba).map(|d| d.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucDetail {
    pub value: f64,
    /// Per-class one-vs-rest AUCROC; `None` for classes absent from `y`.
    pub per_class: Vec<Option<f64>>,
}

pub fn aucroc_detail(y: &[usize], proba: ArrayView2<f64>) -> Result<AucDetail> {
    check_aligned(y.len(), proba.nrows())?;
    let k = proba.ncols();
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(Error::Shape(format!("label {bad} has no score column (width {k})")));
    }
    let present = {
        let mut seen = vec![false; k];
        y.iter().for_each(|&c| seen[c] = true);
        seen
    };
    if present.iter().filter(|p| **p).count() < 2 {
        return invalid("AUCROC needs at least two classes in y");
    }
    let one_vs_rest = |c: usize| -> Result<f64> {
        let pos: Vec<bool> = y.iter().map(|&t| t == c).collect();
        aucroc_binary(&pos, &proba.column(c).to_vec())
    };
    if k == 2 {
        let v = one_vs_rest(1)?;
        return Ok(AucDetail { value: v, per_class: vec![Some(v), Some(v)] });
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| if present[c] { one_vs_rest(c).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let scored: Vec<f64> = per_class.iter().flatten().copied().collect();
    let value = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(AucDetail { value, per_class })
}
