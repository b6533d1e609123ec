use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// The `k` nearest corpus rows of one query, closest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

pub(crate) fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact Euclidean k-nearest-neighbour search; equal distances are ordered
/// by corpus index.
///
/// With `exclude_self`, `queries` must be the corpus itself and query `i`
/// never returns corpus row `i`.
pub fn nn_search(
    corpus: ArrayView2<f64>,
    queries: ArrayView2<f64>,
    k: usize,
    exclude_self: bool,
) -> Result<Vec<Neighbors>> {
    if corpus.ncols() != queries.ncols() {
        return Err(Error::Shape(format!(
            "corpus has {} dims, queries have {}",
            corpus.ncols(),
            queries.ncols()
        )));
    }
    if exclude_self && corpus.nrows() != queries.nrows() {
        return Err(Error::InvalidInput("self-exclusion needs queries identical to the corpus".into()));
    }
    let available = corpus.nrows() - usize::from(exclude_self && corpus.nrows() > 0);
    if k == 0 || k > available {
        return Err(Error::InvalidInput(format!("k = {k} but only {available} candidate neighbours")));
    }

    let results = (0..queries.nrows())
        .into_par_iter()
        .map(|q| {
            let query = queries.row(q);
            let mut cand: Vec<(f64, usize)> = corpus
                .rows()
                .into_iter()
                .enumerate()
                .filter(|(i, _)| !(exclude_self && *i == q))
                .map(|(i, row)| (squared_distance(query, row), i))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            Neighbors {
                indices: cand.iter().map(|c| c.1).collect(),
                distances: cand.iter().map(|c| c.0.sqrt()).collect(),
            }
        })
        .collect();
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::seeded;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn exact_match_comes_first() {
        let corpus = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let res = nn_search(corpus.view(), array![[1.0, 1.0]].view(), 1, false).unwrap();
        assert_eq!(res[0].indices, vec![1]);
        assert_eq!(res[0].distances, vec![0.0]);
    }

    #[test]
    fn one_dimensional_arithmetic() {
        let corpus = array![[0.0], [1.0], [10.0]];
        let res = nn_search(corpus.view(), array![[0.4]].view(), 2, false).unwrap();
        assert_eq!(res[0].indices, vec![0, 1]);
        assert!((res[0].distances[0] - 0.4).abs() < 1e-15);
        assert!((res[0].distances[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_lower_index() {
        let corpus = array![[1.0], [-1.0], [1.0]];
        let res = nn_search(corpus.view(), array![[0.0]].view(), 3, false).unwrap();
        assert_eq!(res[0].indices, vec![0, 1, 2]);
    }

    #[test]
    fn self_exclusion_and_errors() {
        let corpus = array![[0.0], [0.5], [3.0]];
        let res = nn_search(corpus.view(), corpus.view(), 1, true).unwrap();
        assert_eq!(res.iter().map(|n| n.indices[0]).collect::<Vec<_>>(), vec![1, 0, 1]);
        assert!(nn_search(corpus.view(), corpus.view(), 3, true).is_err());
        assert!(nn_search(corpus.view(), array![[0.0, 1.0]].view(), 1, false).is_err());
    }

    #[test]
    fn agrees_with_full_sort_scan() {
        let mut rng = seeded(5);
        let corpus = Array2::from_shape_simple_fn((500, 3), || rng.random_range(-1.0..1.0));
        let queries = Array2::from_shape_simple_fn((40, 3), || rng.random_range(-1.0..1.0));
        let res = nn_search(corpus.view(), queries.view(), 7, false).unwrap();
        for (q, got) in res.iter().enumerate() {
            let mut all: Vec<(f64, usize)> = (0..500)
                .map(|i| {
                    let d: f64 = (0..3).map(|j| (queries[[q, j]] - corpus[[i, j]]).powi(2)).sum();
                    (d.sqrt(), i)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..7].iter().map(|a| a.1).collect();
            assert_eq!(got.indices, want);
        }
    }
}
