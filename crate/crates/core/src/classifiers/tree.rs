//! Binary decision trees: Gini-split CART for classification and
//! gradient/hessian regression trees for boosting.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;

use crate::numeric::StreamRng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node<L> {
    Leaf(L),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(&self, row: ArrayView1<f64>) -> &L {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(value) => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per node; `None` examines all of them.
    pub max_features: Option<usize>,
}

/// Per-node statistics a split criterion accumulates while sweeping one
/// feature in sorted order.
pub(crate) trait Criterion {
    type Stats: Clone;
    type Leaf;
    fn empty(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, row: usize);
    fn remove(&self, stats: &mut Self::Stats, row: usize);
    /// Larger is better; a split is kept when `left + right >= parent`.
    fn score(&self, stats: &Self::Stats, count: usize) -> f64;
    fn is_pure(&self, stats: &Self::Stats) -> bool;
    fn leaf(&self, stats: &Self::Stats, count: usize) -> Self::Leaf;
    /// Tolerance on the gain; zero-gain splits are allowed when it is negative.
    fn min_gain(&self) -> f64;
}

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b { m } else { a }
}

struct Grower<'a, C: Criterion> {
    x: ArrayView2<'a, f64>,
    crit: &'a C,
    params: GrowParams,
    rng: Option<&'a mut StreamRng>,
    nodes: Vec<Node<C::Leaf>>,
}

impl<C: Criterion> Grower<'_, C> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mut stats = self.crit.empty();
        rows.iter().for_each(|&r| self.crit.add(&mut stats, r));
        let n = rows.len();
        let at = self.nodes.len();
        let split = if depth < self.params.max_depth && n >= 2 * self.params.min_leaf && !self.crit.is_pure(&stats) {
            self.best_split(&rows, &stats)
        } else {
            None
        };
        match split {
            None => {
                self.nodes.push(Node::Leaf(self.crit.leaf(&stats, n)));
                at
            }
            Some((feature, threshold)) => {
                self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
                let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.x[[i, feature]] <= threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[at] = Node::Split { feature, threshold, left, right };
                at
            }
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], parent: &C::Stats) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent_score = self.crit.score(parent, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in self.candidate_features() {
            let col = self.x.column(f);
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left = self.crit.empty();
            let mut right = parent.clone();
            for i in 0..n - 1 {
                let row = order[i];
                self.crit.add(&mut left, row);
                self.crit.remove(&mut right, row);
                let (v, next) = (col[row], col[order[i + 1]]);
                let n_left = i + 1;
                if v == next || n_left < self.params.min_leaf || n - n_left < self.params.min_leaf {
                    continue;
                }
                let score = self.crit.score(&left, n_left) + self.crit.score(&right, n - n_left);
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, midpoint(v, next)));
                }
            }
        }
        let (score, f, t) = best?;
        let tol = 1e-12 * parent_score.abs().max(1.0);
        (score - parent_score > self.crit.min_gain() * tol).then_some((f, t))
    }
}

pub(crate) fn grow_tree<C: Criterion>(
    x: ArrayView2<f64>,
    rows: Vec<usize>,
    crit: &C,
    params: GrowParams,
    rng: Option<&mut StreamRng>,
) -> Tree<C::Leaf> {
    let mut g = Grower { x, crit, params, rng, nodes: Vec::new() };
    g.grow(rows, 0);
    Tree { nodes: g.nodes }
}

/// Gini impurity on class positions; leaves hold Laplace-smoothed class
/// frequencies.
pub(crate) struct Gini<'a> {
    pub y: &'a [usize],
    pub n_classes: usize,
}

#[derive(Clone)]
pub(crate) struct ClassCounts {
    counts: Vec<usize>,
    sum_sq: usize,
}

impl Criterion for Gini<'_> {
    type Stats = ClassCounts;
    type Leaf = Vec<f64>;

    fn empty(&self) -> ClassCounts {
        ClassCounts { counts: vec![0; self.n_classes], sum_sq: 0 }
    }

    fn add(&self, s: &mut ClassCounts, row: usize) {
        let c = &mut s.counts[self.y[row]];
        s.sum_sq += 2 * *c + 1;
        *c += 1;
    }

    fn remove(&self, s: &mut ClassCounts, row: usize) {
        let c = &mut s.counts[self.y[row]];
        s.sum_sq -= 2 * *c - 1;
        *c -= 1;
    }

    // n * (1 - gini) = sum c^2 / n, so maximising the sum minimises weighted impurity
    fn score(&self, s: &ClassCounts, count: usize) -> f64 {
        s.sum_sq as f64 / count as f64
    }

    fn is_pure(&self, s: &ClassCounts) -> bool {
        s.counts.iter().filter(|&&c| c > 0).count() <= 1
    }

    fn leaf(&self, s: &ClassCounts, count: usize) -> Vec<f64> {
        let denom = (count + self.n_classes) as f64;
        s.counts.iter().map(|&c| (c + 1) as f64 / denom).collect()
    }

    fn min_gain(&self) -> f64 {
        -1.0
    }
}

/// Second-order boosting objective with L2 leaf penalty; leaves hold the
/// Newton step `-G / (H + l2)`.
pub(crate) struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub l2: f64,
}

impl Criterion for Newton<'_> {
    type Stats = (f64, f64);
    type Leaf = f64;

    fn empty(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn add(&self, s: &mut (f64, f64), row: usize) {
        s.0 += self.grad[row];
        s.1 += self.hess[row];
    }

    fn remove(&self, s: &mut (f64, f64), row: usize) {
        s.0 -= self.grad[row];
        s.1 -= self.hess[row];
    }

    fn score(&self, s: &(f64, f64), _count: usize) -> f64 {
        s.0 * s.0 / (s.1.max(0.0) + self.l2)
    }

    fn is_pure(&self, _s: &(f64, f64)) -> bool {
        false
    }

    fn leaf(&self, s: &(f64, f64), _count: usize) -> f64 {
        -s.0 / (s.1.max(0.0) + self.l2)
    }

    fn min_gain(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn stump_separates_threshold_data() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0, 0, 1, 1];
        let crit = Gini { y: &y, n_classes: 2 };
        let params = GrowParams { max_depth: 1, min_leaf: 1, max_features: None };
        let t = grow_tree(x.view(), (0..4).collect(), &crit, params, None);
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 1.5),
            _ => panic!("expected a split"),
        }
        // Laplace smoothing: 2 of class 0 out of 2 rows -> 3/4
        assert_eq!(t.leaf(x.row(0)), &vec![0.75, 0.25]);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }

    #[test]
    fn pure_node_is_leaf() {
        let x = array![[0.0], [1.0]];
        let y = [1, 1];
        let crit = Gini { y: &y, n_classes: 2 };
        let params = GrowParams { max_depth: 4, min_leaf: 1, max_features: None };
        assert_eq!(grow_tree(x.view(), vec![0, 1], &crit, params, None).nodes.len(), 1);
    }
}
