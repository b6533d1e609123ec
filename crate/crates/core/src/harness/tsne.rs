//! Exact t-SNE.

use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::RngStream;

const P_FLOOR: f64 = 1e-12;
const SEARCH_STEPS: usize = 200;
const ENTROPY_TOL: f64 = 1e-5;
const MAX_HALVINGS: usize = 30;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// First iteration (0-based) that uses the final momentum.
    pub momentum_switch: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 500,
            learning_rate: 200.0,
            early_exaggeration: 4.0,
            exaggeration_iterations: 100,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub coords: Array2<f64>,
    /// `KL(P || Q)` against the unexaggerated affinities after every iteration.
    pub kl_log: Vec<f64>,
    /// Perplexity actually used; capped at `(n - 1) / 3` for small inputs.
    pub perplexity: f64,
}

fn squared_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            (0..n)
                .map(|j| xi.iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect()
        })
        .collect();
    Array2::from_shape_vec((n, n), rows.concat()).expect("square")
}

/// Conditional affinities of one point for precision `beta`, and their
/// Shannon entropy in nats.
fn conditional_row(dist: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    // shift by the nearest distance so the largest weight is exp(0)
    let min = dist.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = dist
        .iter()
        .enumerate()
        .map(|(j, &d)| if j == i { 0.0 } else { (-(d - min) * beta).exp() })
        .collect();
    let total: f64 = p.iter().sum();
    let mut entropy = 0.0;
    for v in p.iter_mut() {
        *v /= total;
        if *v > 0.0 {
            entropy -= *v * v.ln();
        }
    }
    (p, entropy)
}

/// Binary search on the precision of each point so the conditional
/// distribution has the requested perplexity.
fn conditional_affinities(dist: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = dist.nrows();
    let target = perplexity.ln();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = dist.row(i).to_vec();
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut beta = 1.0;
            let mut best = conditional_row(&d, i, beta);
            for _ in 0..SEARCH_STEPS {
                let diff = best.1 - target;
                if diff.abs() < ENTROPY_TOL {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                best = conditional_row(&d, i, beta);
            }
            best.0
        })
        .collect();
    Array2::from_shape_vec((n, n), rows.concat()).expect("square")
}

/// Student-t kernel weights `1 / (1 + |yi - yj|^2)` (zero diagonal) and their sum.
fn kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let dx = y[[i, 0]] - y[[j, 0]];
                    let dy = y[[i, 1]] - y[[j, 1]];
                    1.0 / (1.0 + dx * dx + dy * dy)
                })
                .collect()
        })
        .collect();
    let sum: f64 = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
    (Array2::from_shape_vec((n, n), rows.concat()).expect("square"), sum)
}

fn kl_divergence(p: &Array2<f64>, num: &Array2<f64>, z: f64) -> f64 {
    let n = p.nrows();
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p[[i, j]];
                    let qij = (num[[i, j]] / z).max(P_FLOOR);
                    pij * (pij / qij).ln()
                })
                .sum()
        })
        .collect();
    per_row.iter().sum()
}

fn gradient(p: &Array2<f64>, num: &Array2<f64>, z: f64, y: &Array2<f64>, exaggeration: f64) -> Array2<f64> {
    let n = p.nrows();
    let rows: Vec<[f64; 2]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = (exaggeration * p[[i, j]] - num[[i, j]] / z) * num[[i, j]];
                g[0] += w * (y[[i, 0]] - y[[j, 0]]);
                g[1] += w * (y[[i, 1]] - y[[j, 1]]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect();
    Array2::from_shape_vec((n, 2), rows.concat()).expect("n x 2")
}

fn center(y: &mut Array2<f64>) {
    let mean = y.mean_axis(Axis(0)).expect("non-empty");
    y.rows_mut().into_iter().for_each(|mut r| r -= &mean);
}

/// Embeds the rows of `x` in two dimensions.
///
/// After early exaggeration a step that would raise the KL divergence is
/// retried as a plain gradient step with a halved rate (resetting momentum
/// and gains), and skipped if no halving helps, so the logged divergence
/// never increases from then on.
pub fn tsne_project(x: ArrayView2<f64>, config: &TsneConfig, seed: u64) -> Result<TsneResult> {
    let n = x.nrows();
    if n < 5 {
        return invalid(format!("t-SNE needs at least 5 rows, got {n}"));
    }
    if !(config.perplexity > 0.0 && config.learning_rate > 0.0 && config.early_exaggeration >= 1.0) {
        return invalid("perplexity and learning rate must be positive, exaggeration at least 1");
    }
    if config.iterations == 0 {
        return invalid("t-SNE needs at least one iteration");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("t-SNE input holds non-finite values".into()));
    }
    let perplexity = config.perplexity.min((n - 1) as f64 / 3.0);

    let dist = squared_distances(x);
    let cond = conditional_affinities(&dist, perplexity);
    let mut p = &cond + &cond.t();
    p.mapv_inplace(|v| (v / (2.0 * n as f64)).max(P_FLOOR));
    p.diag_mut().fill(0.0);

    let mut rng = RngStream::new(seed).child("tsne-init").rng();
    let init = Normal::new(0.0, 1e-4).expect("valid sd");
    let mut y = Array2::from_shape_simple_fn((n, 2), || init.sample(&mut rng));
    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let (mut num, mut z) = kernel(&y);
    let mut kl = kl_divergence(&p, &num, z);
    let mut kl_log = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let exaggerating = it < config.exaggeration_iterations;
        let exaggeration = if exaggerating { config.early_exaggeration } else { 1.0 };
        let momentum = if it < config.momentum_switch { config.initial_momentum } else { config.final_momentum };
        let grad = gradient(&p, &num, z, &y, exaggeration);

        for ((g, v), gain) in grad.iter().zip(velocity.iter()).zip(gains.iter_mut()) {
            *gain = if (*g > 0.0) != (*v > 0.0) { *gain + 0.2 } else { (*gain * 0.8).max(MIN_GAIN) };
        }
        let step = &velocity * momentum - &(&gains * &grad) * config.learning_rate;
        let candidate = &y + &step;
        let (cand_num, cand_z) = kernel(&candidate);
        let cand_kl = kl_divergence(&p, &cand_num, cand_z);

        if exaggerating || cand_kl <= kl {
            velocity = step;
            y = candidate;
            (num, z, kl) = (cand_num, cand_z, cand_kl);
        } else {
            velocity.fill(0.0);
            gains.fill(1.0);
            let mut rate = config.learning_rate;
            for _ in 0..MAX_HALVINGS {
                rate /= 2.0;
                let trial = &y - &(&grad * rate);
                let (t_num, t_z) = kernel(&trial);
                let t_kl = kl_divergence(&p, &t_num, t_z);
                if t_kl <= kl {
                    y = trial;
                    (num, z, kl) = (t_num, t_z, t_kl);
                    break;
                }
            }
        }
        center(&mut y);
        if !kl.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("t-SNE diverged at iteration {it}")));
        }
        kl_log.push(kl);
    }
    Ok(TsneResult { coords: y, kl_log, perplexity })
}
