//! Marginal resemblance: Wasserstein distance for continuous columns,
//! Jensen-Shannon divergence and the chi-square test for categorical ones.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tabular::{ColumnKind, Dataset};

use super::special::chi2_survival;

/// 1-Wasserstein distance between two empirical distributions.
///
/// The quantile functions are integrated exactly over the merged breakpoints
/// `i/n` and `j/m`. Interval lengths are accumulated in whole units of
/// `1/(n*m)` and divided out once, so equal sizes reduce to the mean
/// absolute difference of the sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("Wasserstein distance needs two non-empty samples");
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return invalid("Wasserstein distance needs finite samples");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut t_prev: u128 = 0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        // breakpoints (i+1)/n and (j+1)/m expressed in units of 1/(n*m)
        let ta = (i as u128 + 1) * m;
        let tb = (j as u128 + 1) * n;
        let t_next = ta.min(tb);
        total += (t_next - t_prev) as f64 * (a[i] - b[j]).abs();
        t_prev = t_next;
        if ta == t_next {
            i += 1;
        }
        if tb == t_next {
            j += 1;
        }
    }
    Ok(total / (n * m) as f64)
}

fn normalise(counts: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = counts.iter().sum();
    if counts.iter().any(|c| *c < 0.0 || !c.is_finite()) || total <= 0.0 {
        return invalid("count vectors must be non-negative with a positive sum");
    }
    Ok(counts.iter().map(|c| c / total).collect())
}

/// Jensen-Shannon divergence with base-2 logarithms, so it lies in `[0, 1]`.
pub fn jsd_categorical(p_counts: &[f64], q_counts: &[f64]) -> Result<f64> {
    if p_counts.len() != q_counts.len() {
        return Err(Error::Shape(format!(
            "category sets differ ({} vs {} categories)",
            p_counts.len(),
            q_counts.len()
        )));
    }
    let p = normalise(p_counts)?;
    let q = normalise(q_counts)?;
    let kl = |x: &[f64], mix: &[f64]| -> f64 {
        x.iter()
            .zip(mix)
            .filter(|(xi, _)| **xi > 0.0)
            .map(|(xi, mi)| xi * (xi / mi).log2())
            .sum()
    };
    let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((0.5 * kl(&p, &mix) + 0.5 * kl(&q, &mix)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Goodness-of-fit of synthetic counts against real category proportions.
///
/// Expected counts are `real share * n_syn`. Categories expecting fewer than
/// one observation are pooled into an "other" bucket; if that bucket still
/// expects fewer than one it is folded into the smallest remaining bucket.
pub fn chi2_test(real_counts: &[f64], syn_counts: &[f64]) -> Result<Chi2Result> {
    if real_counts.len() != syn_counts.len() {
        return Err(Error::Shape("real and synthetic category sets differ".into()));
    }
    let real = normalise(real_counts)?;
    let n_syn: f64 = syn_counts.iter().sum();
    if n_syn <= 0.0 || syn_counts.iter().any(|c| *c < 0.0) {
        return invalid("synthetic counts must be non-negative with a positive sum");
    }

    let mut buckets: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut other = (0.0, 0.0);
    let mut pooled = false;
    for (share, &obs) in real.iter().zip(syn_counts) {
        let exp = share * n_syn;
        if exp < 1.0 {
            other.0 += obs;
            other.1 += exp;
            pooled = true;
        } else {
            buckets.push((obs, exp));
        }
    }
    if pooled {
        if other.1 >= 1.0 || buckets.is_empty() {
            buckets.push(other);
        } else {
            let smallest = (0..buckets.len())
                .min_by(|&x, &y| buckets[x].1.total_cmp(&buckets[y].1))
                .expect("non-empty");
            buckets[smallest].0 += other.0;
            buckets[smallest].1 += other.1;
        }
    }
    if buckets.len() < 2 {
        return invalid("chi-square test needs at least two categories after pooling");
    }
    let statistic: f64 = buckets.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = buckets.len() - 1;
    Ok(Chi2Result { statistic, df, p_value: chi2_survival(statistic, df as f64) })
}

pub fn chi2_pvalue(real_counts: &[f64], syn_counts: &[f64]) -> Result<f64> {
    chi2_test(real_counts, syn_counts).map(|r| r.p_value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousResemblance {
    pub column: String,
    pub wd: f64,
    /// Distance after scaling both samples by the real column's min-max range.
    pub wd_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalResemblance {
    pub column: String,
    pub jsd: f64,
    /// `None` when the test is undefined (fewer than two pooled categories).
    pub chi2_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResemblanceReport {
    pub continuous: Vec<ContinuousResemblance>,
    pub categorical: Vec<CategoricalResemblance>,
    pub mean_wd: Option<f64>,
    pub mean_wd_scaled: Option<f64>,
    pub mean_jsd: Option<f64>,
    pub mean_chi2_p: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-column resemblance of `syn` to `real` with unweighted means. Sections
/// without applicable columns report `None`.
pub fn resemblance_report(real: &Dataset, syn: &Dataset) -> Result<ResemblanceReport> {
    if !real.schema().compatible_with(syn.schema()) {
        return Err(Error::Schema("real and synthetic schemas differ".into()));
    }
    let mut continuous = Vec::new();
    let mut categorical = Vec::new();
    for (c, spec) in real.schema().columns().iter().enumerate() {
        match spec.kind {
            ColumnKind::Continuous => {
                let r = real.continuous_values(c);
                let s = syn.continuous_values(c);
                let wd = wasserstein_1d(&r, &s)?;
                let min = r.iter().copied().fold(f64::INFINITY, f64::min);
                let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = if max > min { max - min } else { 1.0 };
                // a shift leaves W1 unchanged, so only the range matters
                continuous.push(ContinuousResemblance { column: spec.name.clone(), wd, wd_scaled: wd / range });
            }
            ColumnKind::Categorical => {
                let r: Vec<f64> = real.category_counts(c).iter().map(|&x| x as f64).collect();
                let s: Vec<f64> = syn.category_counts(c).iter().map(|&x| x as f64).collect();
                categorical.push(CategoricalResemblance {
                    column: spec.name.clone(),
                    jsd: jsd_categorical(&r, &s)?,
                    chi2_p: chi2_pvalue(&r, &s).ok(),
                });
            }
        }
    }
    Ok(ResemblanceReport {
        mean_wd: mean(continuous.iter().map(|c| c.wd)),
        mean_wd_scaled: mean(continuous.iter().map(|c| c.wd_scaled)),
        mean_jsd: mean(categorical.iter().map(|c| c.jsd)),
        mean_chi2_p: mean(categorical.iter().filter_map(|c| c.chi2_p)),
        continuous,
        categorical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wd_identity_and_shift() {
        assert_eq!(wasserstein_1d(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn wd_unequal_sizes() {
        // {0} vs {0, 1}: half the mass moves by 1
        assert!((wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        // {0, 3} vs {1, 1, 2}: quantiles differ by 1 on [0,1/2), 2 on [1/2,2/3), 1 on [2/3,1]
        let expect = 0.5 * 1.0 + (2.0 / 3.0 - 0.5) * 2.0 + (1.0 / 3.0) * 1.0;
        assert!((wasserstein_1d(&[0.0, 3.0], &[1.0, 1.0, 2.0]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn jsd_reference_values() {
        assert_eq!(jsd_categorical(&[3.0, 1.0], &[6.0, 2.0]).unwrap(), 0.0);
        assert!((jsd_categorical(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        // 0.5 log2(4/3) + 0.25 log2(2/3) + 0.25 log2(2)
        let expect = 0.5 * (4.0f64 / 3.0).log2() + 0.25 * (2.0f64 / 3.0).log2() + 0.25;
        let got = jsd_categorical(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.3113).abs() < 5e-5);
        assert!(jsd_categorical(&[1.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn chi2_reference_values() {
        let same = chi2_test(&[50.0, 30.0, 20.0], &[5.0, 3.0, 2.0]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        let r = chi2_test(&[1.0, 1.0], &[60.0, 40.0]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert_eq!(r.df, 1);
        assert!((r.p_value - 0.045_500_263_896_358_4).abs() < 1e-10);
        assert_eq!(chi2_pvalue(&[1.0, 1.0], &[50.0, 50.0]).unwrap(), 1.0);
    }

    #[test]
    fn chi2_pools_rare_categories() {
        // the third category expects 0.5 of 50 draws and joins the smallest bucket
        let r = chi2_test(&[49.5, 49.5, 1.0], &[25.0, 24.0, 1.0]).unwrap();
        assert_eq!(r.df, 1);
        assert!(chi2_test(&[1.0, 0.0], &[3.0, 1.0]).is_err());
    }
}
