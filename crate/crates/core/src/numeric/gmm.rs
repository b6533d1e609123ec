//! Diagonal-covariance Gaussian mixtures fitted by EM.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::rng::seeded;

/// Lower bound on every component variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop once the mean per-sample log-likelihood gains less than this.
    pub tol: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean per-sample log-likelihood before each M-step, ending with the
    /// returned model's value.
    pub trace: Vec<f64>,
}

impl GmmFit {
    pub fn final_loglik(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// `ln pi_k + ln N(x; mu_k, sigma_k^2)` for every component.
    pub fn component_log_densities(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&w, (mu, var))| {
                if w <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut acc = 0.0;
                for ((xj, mj), vj) in x.iter().zip(mu).zip(var) {
                    acc += (2.0 * PI * vj).ln() + (xj - mj).powi(2) / vj;
                }
                w.ln() - 0.5 * acc
            })
            .collect()
    }

    /// Log-density of one point, via log-sum-exp.
    pub fn loglik(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("point has {} dims, model has {}", x.len(), self.dim())));
        }
        Ok(log_sum_exp(&self.component_log_densities(x)))
    }

    pub fn score_samples(&self, samples: ArrayView2<f64>) -> Result<Vec<f64>> {
        samples.rows().into_iter().map(|r| self.loglik(&r.to_vec())).collect()
    }

    /// Posterior component probabilities of one point.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let logs = self.component_log_densities(x);
        let total = log_sum_exp(&logs);
        logs.iter().map(|l| (l - total).exp()).collect()
    }

    pub fn n_free_params(&self) -> usize {
        let k = self.n_components();
        (k - 1) + 2 * k * self.dim()
    }

    /// Bayesian information criterion on `samples` (lower is better).
    pub fn bic(&self, samples: ArrayView2<f64>) -> Result<f64> {
        let total: f64 = self.score_samples(samples)?.iter().sum();
        Ok(-2.0 * total + self.n_free_params() as f64 * (samples.nrows() as f64).ln())
    }
}

/// Fits a `k`-component diagonal mixture with EM started from k-means++.
pub fn gmm_fit(samples: ArrayView2<f64>, k: usize, seed: u64, opts: GmmOptions) -> Result<GmmFit> {
    let n = samples.nrows();
    if k == 0 {
        return Err(Error::InvalidInput("a mixture needs at least one component".into()));
    }
    if n < k {
        return Err(Error::InvalidInput(format!("{n} samples cannot support {k} components")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }

    let centers = kmeans_pp(samples, k, seed);
    let mut resp = Array2::<f64>::zeros((n, k));
    for (i, row) in samples.rows().into_iter().enumerate() {
        resp[[i, nearest(&row, &centers)]] = 1.0;
    }
    let fallback = GmmModel {
        weights: vec![0.0; k],
        means: centers,
        variances: vec![vec![VARIANCE_FLOOR; samples.ncols()]; k],
    };
    let mut model = m_step(samples, &resp, &fallback);

    let mut trace = Vec::new();
    for it in 0..=opts.max_iter {
        let ll = e_step(&model, samples, &mut resp);
        if !ll.is_finite() {
            return Err(Error::Numerical(format!("EM log-likelihood became {ll} at iteration {it}")));
        }
        let converged = trace.last().is_some_and(|prev: &f64| ll - prev < opts.tol);
        trace.push(ll);
        if converged || it == opts.max_iter {
            break;
        }
        model = m_step(samples, &resp, &model);
    }
    Ok(GmmFit { model, trace })
}

/// Convenience wrapper for one-dimensional data.
pub fn gmm_fit_1d(values: &[f64], k: usize, seed: u64, opts: GmmOptions) -> Result<GmmFit> {
    let samples = ArrayView2::from_shape((values.len(), 1), values).expect("contiguous slice");
    gmm_fit(samples, k, seed, opts)
}

fn sq_dist(a: &ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(row: &ArrayView1<f64>, centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

fn kmeans_pp(samples: ArrayView2<f64>, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = samples.nrows();
    let mut rng = seeded(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = samples.rows().into_iter().map(|r| sq_dist(&r, &samples.row(chosen[0]).to_vec())).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // guard against rounding walking past the last positive weight
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        let center = samples.row(next).to_vec();
        for (i, row) in samples.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(&row, &center));
        }
    }
    chosen.iter().map(|&i| samples.row(i).to_vec()).collect()
}

/// Fills `resp` and returns the mean per-sample log-likelihood.
fn e_step(model: &GmmModel, samples: ArrayView2<f64>, resp: &mut Array2<f64>) -> f64 {
    let mut total = 0.0;
    for (i, row) in samples.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let logs = model.component_log_densities(&x);
        let lse = log_sum_exp(&logs);
        total += lse;
        for (c, l) in logs.iter().enumerate() {
            resp[[i, c]] = (l - lse).exp();
        }
    }
    total / samples.nrows() as f64
}

/// Weighted maximum-likelihood update. Components with no mass keep their
/// previous parameters and get weight zero.
fn m_step(samples: ArrayView2<f64>, resp: &Array2<f64>, previous: &GmmModel) -> GmmModel {
    let (n, d) = samples.dim();
    let k = resp.ncols();
    let mut weights = vec![0.0; k];
    let mut means = previous.means.clone();
    let mut variances = previous.variances.clone();
    for c in 0..k {
        let mass: f64 = resp.column(c).sum();
        if mass <= f64::MIN_POSITIVE * n as f64 {
            continue;
        }
        weights[c] = mass / n as f64;
        let mut mu = vec![0.0; d];
        for (i, row) in samples.rows().into_iter().enumerate() {
            let r = resp[[i, c]];
            for j in 0..d {
                mu[j] += r * row[j];
            }
        }
        mu.iter_mut().for_each(|m| *m /= mass);
        let mut var = vec![0.0; d];
        for (i, row) in samples.rows().into_iter().enumerate() {
            let r = resp[[i, c]];
            for j in 0..d {
                var[j] += r * (row[j] - mu[j]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v = (*v / mass).max(VARIANCE_FLOOR));
        means[c] = mu;
        variances[c] = var;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GmmModel { weights, means, variances }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_component_is_closed_form() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let fit = gmm_fit_1d(&xs, 1, 0, GmmOptions::default()).unwrap();
        let mean = 3.5;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((fit.model.means[0][0] - mean).abs() < 1e-12);
        assert!((fit.model.variances[0][0] - var).abs() < 1e-12);
        assert_eq!(fit.model.weights, vec![1.0]);
    }

    #[test]
    fn constant_data_hits_the_variance_floor() {
        let fit = gmm_fit_1d(&[5.0; 10], 1, 0, GmmOptions::default()).unwrap();
        assert_eq!(fit.model.variances[0][0], VARIANCE_FLOOR);
    }

    #[test]
    fn recovers_two_separated_clusters() {
        let xs = [-0.1, 0.0, 0.1, 9.9, 10.0, 10.1];
        for seed in 0..10 {
            let fit = gmm_fit_1d(&xs, 2, seed, GmmOptions::default()).unwrap();
            let mut means: Vec<f64> = fit.model.means.iter().map(|m| m[0]).collect();
            means.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!((means[0] - 0.0).abs() < 0.05 && (means[1] - 10.0).abs() < 0.05, "{means:?}");
        }
    }

    #[test]
    fn one_point_per_component_when_n_equals_k() {
        let xs = [0.0, 3.0, 8.0];
        let fit = gmm_fit_1d(&xs, 3, 4, GmmOptions::default()).unwrap();
        let mut means: Vec<f64> = fit.model.means.iter().map(|m| m[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(means, vec![0.0, 3.0, 8.0]);
        for w in &fit.model.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(gmm_fit_1d(&[1.0], 2, 0, GmmOptions::default()).is_err());
    }

    #[test]
    fn standard_normal_peak() {
        let m = GmmModel { weights: vec![1.0], means: vec![vec![0.0]], variances: vec![vec![1.0]] };
        assert!((m.loglik(&[0.0]).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!(m.loglik(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn symmetric_model_is_even() {
        let m = GmmModel {
            weights: vec![0.5, 0.5],
            means: vec![vec![-2.0], vec![2.0]],
            variances: vec![vec![0.7], vec![0.7]],
        };
        for x in [0.3, 1.7, 4.2] {
            assert_eq!(m.loglik(&[x]).unwrap(), m.loglik(&[-x]).unwrap());
        }
    }

    #[test]
    fn log_sum_exp_matches_direct_summation() {
        let mut rng = seeded(3);
        for _ in 0..50 {
            let k = rng.random_range(1..5);
            let d = rng.random_range(1..4);
            let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let model = GmmModel {
                weights: w,
                means: (0..k).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
                variances: (0..k).map(|_| (0..d).map(|_| rng.random_range(0.3..3.0)).collect()).collect(),
            };
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let direct: f64 = (0..k)
                .map(|c| {
                    let mut p = model.weights[c];
                    for (j, xj) in x.iter().enumerate() {
                        let v = model.variances[c][j];
                        p *= (-(xj - model.means[c][j]).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
                    }
                    p
                })
                .sum::<f64>()
                .ln();
            assert!((direct - model.loglik(&x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn em_never_decreases_the_likelihood() {
        let mut rng = seeded(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for seed in 0..20 {
            let n = 150;
            let data = Array2::from_shape_fn((n, 2), |(i, _)| normal.sample(&mut rng) + if i % 3 == 0 { 4.0 } else { 0.0 });
            let fit = gmm_fit(data.view(), 3, seed, GmmOptions::default()).unwrap();
            for w in fit.trace.windows(2) {
                assert!(w[1] - w[0] >= -1e-9, "{:?}", w);
            }
            let s: f64 = fit.model.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
