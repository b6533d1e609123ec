use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::numeric::rng::seeded;

use super::dataset::Dataset;

/// Seeded train/test partition.
///
/// The train side receives `round(train_fraction * n)` rows (kept in their
/// original order). With `stratify_on`, every class of that categorical
/// column is split in proportion, with per-class counts chosen by largest
/// remainder so the overall size is still exact.
pub fn split(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratify_on: Option<usize>,
) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return invalid(format!("train fraction {train_fraction} must lie strictly between 0 and 1"));
    }
    if n < 2 {
        return invalid("splitting needs at least two rows");
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = seeded(seed);

    let mut train: Vec<usize> = match stratify_on {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(n_train);
            idx
        }
        Some(col) => {
            let labels = ds.labels(col)?;
            let k = ds.schema().column(col).categories.len();
            let mut strata: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (r, &l) in labels.iter().enumerate() {
                strata[l].push(r);
            }
            if let Some((c, s)) = strata.iter().enumerate().find(|(_, s)| s.len() == 1) {
                return Err(Error::InvalidInput(format!(
                    "stratum {:?} has {} row(s); stratified splitting needs at least 2",
                    ds.schema().column(col).categories[c],
                    s.len()
                )));
            }
            let quotas = largest_remainder(&strata.iter().map(Vec::len).collect::<Vec<_>>(), n_train);
            let mut picked = Vec::with_capacity(n_train);
            for (stratum, quota) in strata.iter_mut().zip(quotas) {
                stratum.shuffle(&mut rng);
                picked.extend_from_slice(&stratum[..quota]);
            }
            picked
        }
    };
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Splits `total` across groups proportionally to `sizes`; leftovers go to
/// the largest fractional parts (ties to the lower index).
fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * total as f64 / n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    let mut left = total - quotas.iter().sum::<usize>();
    for &g in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quotas[g] < sizes[g] {
            quotas[g] += 1;
            left -= 1;
        }
    }
    quotas
}

/// Uniform sample without replacement of `round(fraction * n)` rows, in
/// sampled order.
pub fn sample_fraction(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return invalid(format!("sample fraction {fraction} must lie in (0, 1]"));
    }
    let n = ds.n_rows();
    let m = (fraction * n as f64).round() as usize;
    let mut rng = seeded(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher-Yates
    for i in 0..m.min(n.saturating_sub(1)) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(m);
    Ok(ds.select_rows(&idx))
}
