//! Mode-specific normalization of continuous columns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{gmm_fit_1d, GmmModel, GmmOptions, RngStream};

/// A one-dimensional Gaussian mixture whose components are the modes of a
/// continuous column. Values are represented as a mode plus an offset
/// `alpha = (v - mu) / (4 sigma)` clipped to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeNormalizer {
    pub gmm: GmmModel,
}

/// Fits mixtures with 1 to `max_modes` components and keeps the one with the
/// lowest BIC; ties keep fewer modes. Columns with fewer than two distinct
/// values get a single mode.
pub fn fit_mode_normalizer(values: &[f64], max_modes: usize, seed: u64) -> Result<ModeNormalizer> {
    if values.is_empty() {
        return invalid("cannot fit modes of an empty column");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return invalid("mode normalization needs finite values");
    }
    if max_modes == 0 {
        return invalid("max_modes must be at least 1");
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let cap = max_modes.min(distinct.len());
    let stream = RngStream::new(seed).child("modes");
    let mut best: Option<(f64, GmmModel)> = None;
    for k in 1..=cap {
        let fit = gmm_fit_1d(values, k, stream.child(k).derived_seed(), GmmOptions::default())?;
        let samples = ndarray::ArrayView2::from_shape((values.len(), 1), values).expect("contiguous slice");
        let bic = fit.model.bic(samples)?;
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, fit.model));
        }
    }
    let (_, mut gmm) = best.expect("at least one candidate");
    prune_empty(&mut gmm);
    Ok(ModeNormalizer { gmm })
}

/// Drops components that ended up with no weight and renormalises.
fn prune_empty(gmm: &mut GmmModel) {
    let keep: Vec<usize> = (0..gmm.n_components()).filter(|&c| gmm.weights[c] > 0.0).collect();
    if keep.len() == gmm.n_components() {
        return;
    }
    let total: f64 = keep.iter().map(|&c| gmm.weights[c]).sum();
    gmm.weights = keep.iter().map(|&c| gmm.weights[c] / total).collect();
    gmm.means = keep.iter().map(|&c| gmm.means[c].clone()).collect();
    gmm.variances = keep.iter().map(|&c| gmm.variances[c].clone()).collect();
}

impl ModeNormalizer {
    pub fn n_modes(&self) -> usize {
        self.gmm.n_components()
    }

    pub fn mean(&self, mode: usize) -> f64 {
        self.gmm.means[mode][0]
    }

    pub fn sd(&self, mode: usize) -> f64 {
        self.gmm.variances[mode][0].sqrt()
    }

    /// Offset of `value` within `mode`.
    pub fn alpha(&self, value: f64, mode: usize) -> f64 {
        ((value - self.mean(mode)) / (4.0 * self.sd(mode))).clamp(-1.0, 1.0)
    }

    /// Draws a mode in proportion to its responsibility for `value` and
    /// returns `(alpha, mode)`.
    pub fn normalize<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> Result<(f64, usize)> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("cannot normalize {value}")));
        }
        let resp = self.gmm.responsibilities(&[value]);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut mode = resp.len() - 1;
        for (c, r) in resp.iter().enumerate() {
            acc += r;
            if u < acc {
                mode = c;
                break;
            }
        }
        Ok((self.alpha(value, mode), mode))
    }

    pub fn inverse(&self, alpha: f64, mode: usize) -> f64 {
        self.mean(mode) + 4.0 * self.sd(mode) * alpha.clamp(-1.0, 1.0)
    }
}
