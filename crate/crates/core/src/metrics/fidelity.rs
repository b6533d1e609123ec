//! Fidelity of synthetic rows in a shared encoded space: alpha-precision,
//! beta-recall, authenticity and their mean.

use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::nn_search;
use crate::tabular::{Dataset, Encoder, Scaling};

/// Levels 0.05, 0.10, ..., 0.95.
pub fn default_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

fn check_pair(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return invalid("fidelity metrics need non-empty inputs");
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("encoded widths differ ({} vs {})", a.ncols(), b.ncols())));
    }
    Ok(())
}

/// Linear-interpolation quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn distances_to(rows: &ArrayView2<f64>, center: &Array1<f64>) -> Vec<f64> {
    rows.rows()
        .into_iter()
        .map(|r| r.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect()
}

/// Ball construction on `reference`; coverage measured on `probe`.
fn ball_coverage_score(reference: ArrayView2<f64>, probe: ArrayView2<f64>, grid: &[f64]) -> Result<f64> {
    check_pair(&reference, &probe)?;
    if grid.is_empty() || grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return invalid("quantile grid must be non-empty with levels in [0, 1]");
    }
    let center = reference.mean_axis(Axis(0)).expect("non-empty");
    let mut radii = distances_to(&reference, &center);
    radii.sort_by(f64::total_cmp);
    let probe_d = distances_to(&probe, &center);
    let dev: f64 = grid
        .iter()
        .map(|&level| {
            let r = quantile_sorted(&radii, level);
            let inside = probe_d.iter().filter(|&&d| d <= r).count() as f64 / probe_d.len() as f64;
            (inside - level).abs()
        })
        .sum::<f64>()
        / grid.len() as f64;
    Ok((1.0 - 2.0 * dev).clamp(0.0, 1.0))
}

pub fn alpha_precision(real: ArrayView2<f64>, syn: ArrayView2<f64>, grid: &[f64]) -> Result<f64> {
    ball_coverage_score(real, syn, grid)
}

pub fn beta_recall(real: ArrayView2<f64>, syn: ArrayView2<f64>, grid: &[f64]) -> Result<f64> {
    ball_coverage_score(syn, real, grid)
}

/// Fraction of synthetic rows farther from their nearest real row than that
/// row is from its own nearest real neighbour.
pub fn authenticity(real: ArrayView2<f64>, syn: ArrayView2<f64>) -> Result<f64> {
    check_pair(&real, &syn)?;
    if real.nrows() < 2 {
        return invalid("authenticity needs at least two real rows");
    }
    let real_nn = nn_search(real, real, 1, true)?;
    let syn_nn = nn_search(real, syn, 1, false)?;
    let authentic = syn_nn
        .iter()
        .filter(|nb| nb.distances[0] > real_nn[nb.indices[0]].distances[0])
        .count();
    Ok(authentic as f64 / syn.nrows() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub alpha_precision: f64,
    pub beta_recall: f64,
    pub authenticity: f64,
    pub quality: f64,
}

impl FidelityReport {
    pub fn from_parts(alpha_precision: f64, beta_recall: f64, authenticity: f64) -> Self {
        let quality = (alpha_precision + beta_recall + authenticity) / 3.0;
        FidelityReport { alpha_precision, beta_recall, authenticity, quality }
    }
}

/// Weight applied to one-hot blocks so that a single category flip moves a
/// row by distance 1.
pub const CATEGORY_WEIGHT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Encodes `real` and `syn` with z-scores fitted on `real` and weighted one-hot blocks.
pub fn shared_encoding(real: &Dataset, syn: &Dataset) -> Result<(ndarray::Array2<f64>, ndarray::Array2<f64>)> {
    if !real.schema().compatible_with(syn.schema()) {
        return Err(Error::Schema("real and synthetic schemas differ".into()));
    }
    let enc = Encoder::fit(real, Scaling::Zscore)?.with_categorical_weight(CATEGORY_WEIGHT);
    Ok((enc.transform(real)?.matrix, enc.transform(syn)?.matrix))
}

pub fn quality(real: &Dataset, syn: &Dataset) -> Result<FidelityReport> {
    let (r, s) = shared_encoding(real, syn)?;
    let grid = default_grid();
    Ok(FidelityReport::from_parts(
        alpha_precision(r.view(), s.view(), &grid)?,
        beta_recall(r.view(), s.view(), &grid)?,
        authenticity(r.view(), s.view())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn grid_is_symmetric() {
        let g = default_grid();
        assert_eq!(g.len(), 19);
        assert!((g.iter().sum::<f64>() / 19.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn precision_extremes() {
        let real = Array2::from_shape_fn((200, 2), |(i, j)| ((i * 7 + j * 13) % 23) as f64);
        let at_center = Array2::from_shape_fn((50, 2), |(_, j)| real.column(j).mean().unwrap());
        assert!(alpha_precision(real.view(), at_center.view(), &default_grid()).unwrap() < 1e-12);
        let far = Array2::from_elem((50, 2), 1e6);
        assert_eq!(alpha_precision(real.view(), far.view(), &default_grid()).unwrap(), 0.0);
        assert!(alpha_precision(real.view(), real.view(), &default_grid()).unwrap() >= 0.9);
    }

    #[test]
    fn recall_is_mirrored_precision() {
        let a = array![[0.0, 1.0], [2.0, 0.5], [1.0, 1.0], [3.0, -1.0]];
        let b = array![[0.5, 0.5], [1.5, 0.0], [2.5, 1.0]];
        let g = default_grid();
        assert_eq!(beta_recall(a.view(), b.view(), &g).unwrap(), alpha_precision(b.view(), a.view(), &g).unwrap());
    }

    #[test]
    fn authenticity_examples() {
        let real = array![[0.0], [1.0]];
        let syn = array![[0.05], [3.0]];
        assert_eq!(authenticity(real.view(), syn.view()).unwrap(), 0.5);
        assert_eq!(authenticity(real.view(), real.view()).unwrap(), 0.0);
        assert!(authenticity(array![[0.0]].view(), syn.view()).is_err());
    }

    #[test]
    fn quality_is_mean() {
        let r = FidelityReport::from_parts(0.6, 0.5, 0.7);
        assert!((r.quality - 0.6).abs() < 1e-12);
        assert_eq!(FidelityReport::from_parts(1.0, 1.0, 1.0).quality, 1.0);
    }
}
