//! Fitting and probability prediction for every classifier family.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::numeric::{gmm_fit, nn_search, softmax_rows, Activation, AdamConfig, AdamState, GmmModel, GmmOptions, Loss, Mlp, RngStream};

use super::spec::{ClassifierSpec, GbtParams};
use super::tree::{grow_tree, Gini, GrowParams, Newton, Tree};

#[derive(Debug, Clone, PartialEq)]
struct Booster {
    base: f64,
    trees: Vec<Tree<f64>>,
    /// Mean logistic loss on the training rows before the first and after each round.
    loss_trace: Vec<f64>,
}

impl Booster {
    fn margin(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        self.base + self.trees.iter().map(|t| *t.leaf(row)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Tree(Tree<Vec<f64>>),
    Forest(Vec<Tree<Vec<f64>>>),
    /// One booster for binary problems, one per class otherwise.
    Gbt(Vec<Booster>),
    Knn { x: Array2<f64>, y: Vec<usize>, k: usize },
    Linear { weights: Array2<f64>, bias: Array1<f64> },
    Mlp(Mlp),
    GmmDensity { log_priors: Vec<f64>, models: Vec<GmmModel> },
}

/// A fitted classifier. Probability columns follow [`TrainedClassifier::classes`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    spec: ClassifierSpec,
    classes: Vec<usize>,
    n_features: usize,
    fitted: Fitted,
}

fn check_features(x: &ArrayView2<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("features contain NaN or infinite values");
    }
    Ok(())
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss for 0/1 targets given margins.
fn logistic_loss(margins: &[f64], target: &[f64]) -> f64 {
    // log(1 + e^m) - t m, computed stably
    margins
        .iter()
        .zip(target)
        .map(|(&m, &t)| m.max(0.0) + (-m.abs()).exp().ln_1p() - t * m)
        .sum::<f64>()
        / margins.len() as f64
}

fn fit_booster(x: ArrayView2<f64>, target: &[f64], p: &GbtParams) -> Booster {
    let n = target.len();
    let prior = (target.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base = (prior / (1.0 - prior)).ln();
    let mut margins = vec![base; n];
    let mut loss = logistic_loss(&margins, target);
    let mut booster = Booster { base, trees: Vec::with_capacity(p.n_rounds), loss_trace: vec![loss] };
    let params = GrowParams { max_depth: p.max_depth, min_leaf: p.min_leaf, max_features: None };
    for _ in 0..p.n_rounds {
        let prob: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
        let grad: Vec<f64> = prob.iter().zip(target).map(|(q, t)| q - t).collect();
        let hess: Vec<f64> = prob.iter().map(|q| q * (1.0 - q)).collect();
        let crit = Newton { grad: &grad, hess: &hess, l2: p.l2 };
        let mut tree = grow_tree(x, (0..n).collect(), &crit, params, None);
        let step: Vec<f64> = x.rows().into_iter().map(|r| *tree.leaf(r)).collect();
        // shrink the round until the training loss does not increase
        let mut scale = p.learning_rate;
        let mut trial: Vec<f64>;
        let mut trial_loss;
        let mut halvings = 0;
        loop {
            trial = margins.iter().zip(&step).map(|(m, s)| m + scale * s).collect();
            trial_loss = logistic_loss(&trial, target);
            if trial_loss <= loss || halvings == 30 {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        if trial_loss > loss {
            booster.loss_trace.push(loss);
            continue;
        }
        for node in tree.nodes.iter_mut() {
            if let super::tree::Node::Leaf(v) = node {
                *v *= scale;
            }
        }
        margins = trial;
        loss = trial_loss;
        booster.loss_trace.push(loss);
        booster.trees.push(tree);
    }
    booster
}

fn fit_linear(x: ArrayView2<f64>, y: &[usize], k: usize, l2: f64, epochs: usize, lr: f64) -> Result<Fitted> {
    let (n, d) = x.dim();
    let mut weights = Array2::<f64>::zeros((d, k));
    let mut bias = Array1::<f64>::zeros(k);
    let mut adam = AdamState::new([d * k, k]);
    let cfg = AdamConfig { lr, beta1: 0.9, beta2: 0.999, ..AdamConfig::default() };
    for _ in 0..epochs {
        let mut grad_out = softmax_rows(&(x.dot(&weights) + &bias));
        for (i, &c) in y.iter().enumerate() {
            grad_out[[i, c]] -= 1.0;
        }
        grad_out /= n as f64;
        let gw = x.t().dot(&grad_out) + &weights * l2;
        let gw = gw.as_standard_layout().into_owned();
        let gb = grad_out.sum_axis(Axis(0));
        adam.step(
            &cfg,
            &mut [weights.as_slice_mut().expect("standard layout"), bias.as_slice_mut().expect("standard layout")],
            &[gw.as_slice().expect("standard layout"), gb.as_slice().expect("standard layout")],
        )?;
    }
    Ok(Fitted::Linear { weights, bias })
}

fn fit_mlp(x: ArrayView2<f64>, y: &[usize], k: usize, p: &super::spec::MlpParams, stream: &RngStream) -> Result<Fitted> {
    let n = x.nrows();
    let mut sizes = vec![x.ncols()];
    sizes.extend(&p.hidden);
    sizes.push(k);
    let mut rng = stream.child("init").rng();
    let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut rng);
    let mut adam = AdamState::new(net.param_slices_mut().iter().map(|s| s.len()).collect::<Vec<_>>());
    let cfg = AdamConfig { lr: p.lr, ..AdamConfig::default() };
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = stream.child("batches").rng();
    for _ in 0..p.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(p.batch_size) {
            let batch = x.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (_, grads) = net.loss_and_grad(batch.view(), Loss::CrossEntropy(&labels))?;
            adam.step(&cfg, &mut net.param_slices_mut(), &grads.slices())?;
        }
    }
    Ok(Fitted::Mlp(net))
}

fn fit_gmm_density(x: ArrayView2<f64>, y: &[usize], k: usize, components: usize, stream: &RngStream) -> Result<Fitted> {
    let n = x.nrows();
    let per_class: Vec<(f64, GmmModel)> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut rows: Vec<usize> = (0..n).filter(|&i| y[i] == c).collect();
            // sorting makes the fit independent of the training row order
            rows.sort_by(|&a, &b| {
                x.row(a)
                    .iter()
                    .zip(x.row(b).iter())
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let samples = x.select(Axis(0), &rows);
            let fit = gmm_fit(samples.view(), components.min(rows.len()), stream.child(c).derived_seed(), GmmOptions::default())?;
            Ok(((rows.len() as f64 / n as f64).ln(), fit.model))
        })
        .collect::<Result<_>>()?;
    let (log_priors, models) = per_class.into_iter().unzip();
    Ok(Fitted::GmmDensity { log_priors, models })
}

fn average_leaves(trees: &[Tree<Vec<f64>>], x: ArrayView2<f64>, k: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((x.nrows(), k));
    for (i, row) in x.rows().into_iter().enumerate() {
        for t in trees {
            for (o, p) in out.row_mut(i).iter_mut().zip(t.leaf(row)) {
                *o += p;
            }
        }
    }
    out / trees.len() as f64
}

/// Fits `spec` on features `x` and integer labels `y`. Classes are the
/// distinct labels of `y` in increasing order; at least two are required.
pub fn train(spec: &ClassifierSpec, x: ArrayView2<f64>, y: &[usize], seed: u64) -> Result<TrainedClassifier> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} feature rows but {} labels", x.nrows(), y.len())));
    }
    check_features(&x)?;
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return invalid("training labels contain a single class");
    }
    let pos: Vec<usize> = y.iter().map(|c| classes.binary_search(c).expect("label present")).collect();
    let k = classes.len();
    let n = y.len();
    let d = x.ncols();
    let stream = RngStream::new(seed).child(spec.family());

    let fitted = match spec {
        ClassifierSpec::DecisionTree(p) => {
            let crit = Gini { y: &pos, n_classes: k };
            let params = GrowParams { max_depth: p.max_depth, min_leaf: p.min_leaf, max_features: None };
            Fitted::Tree(grow_tree(x, (0..n).collect(), &crit, params, None))
        }
        ClassifierSpec::RandomForest(p) => {
            let crit = Gini { y: &pos, n_classes: k };
            let max_features = ((d as f64).sqrt().round() as usize).clamp(1, d.max(1));
            let params = GrowParams { max_depth: p.max_depth, min_leaf: p.min_leaf, max_features: Some(max_features) };
            let trees = (0..p.n_trees)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream.child(t).rng();
                    let rows: Vec<usize> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect();
                    grow_tree(x, rows, &crit, params, Some(&mut rng))
                })
                .collect();
            Fitted::Forest(trees)
        }
        ClassifierSpec::Gbt(p) => {
            let targets: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
            let boosters = targets
                .into_par_iter()
                .map(|c| {
                    let t: Vec<f64> = pos.iter().map(|&yi| f64::from(u8::from(yi == c))).collect();
                    fit_booster(x, &t, p)
                })
                .collect();
            Fitted::Gbt(boosters)
        }
        ClassifierSpec::Knn(p) => Fitted::Knn { x: x.to_owned(), y: pos, k: p.k.min(n) },
        ClassifierSpec::Linear(p) => fit_linear(x, &pos, k, p.l2, p.epochs, p.lr)?,
        ClassifierSpec::Mlp(p) => fit_mlp(x, &pos, k, p, &stream)?,
        ClassifierSpec::GmmDensity(p) => fit_gmm_density(x, &pos, k, p.components, &stream)?,
    };
    Ok(TrainedClassifier { spec: spec.clone(), classes, n_features: d, fitted })
}

impl TrainedClassifier {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    /// Labels seen during training, in probability-column order.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Per-booster training loss traces for boosted models.
    pub fn boosting_losses(&self) -> Option<Vec<&[f64]>> {
        match &self.fitted {
            Fitted::Gbt(b) => Some(b.iter().map(|b| b.loss_trace.as_slice()).collect()),
            _ => None,
        }
    }

    /// Class probabilities, one row per sample and one column per entry of
    /// [`TrainedClassifier::classes`].
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape(format!("expected {} features, got {}", self.n_features, x.ncols())));
        }
        check_features(&x)?;
        let k = self.classes.len();
        let n = x.nrows();
        let proba = match &self.fitted {
            Fitted::Tree(t) => average_leaves(std::slice::from_ref(t), x, k),
            Fitted::Forest(trees) => average_leaves(trees, x, k),
            Fitted::Gbt(boosters) => {
                let mut out = Array2::<f64>::zeros((n, k));
                for (i, row) in x.rows().into_iter().enumerate() {
                    if boosters.len() == 1 {
                        let p = sigmoid(boosters[0].margin(row));
                        out[[i, 0]] = 1.0 - p;
                        out[[i, 1]] = p;
                    } else {
                        let ps: Vec<f64> = boosters.iter().map(|b| sigmoid(b.margin(row))).collect();
                        let total: f64 = ps.iter().sum();
                        for (c, p) in ps.iter().enumerate() {
                            out[[i, c]] = if total > 0.0 { p / total } else { 1.0 / k as f64 };
                        }
                    }
                }
                out
            }
            Fitted::Knn { x: train_x, y, k: kk } => {
                let nbrs = nn_search(train_x.view(), x, *kk, false)?;
                let mut out = Array2::<f64>::zeros((n, k));
                for (i, nb) in nbrs.iter().enumerate() {
                    for &j in &nb.indices {
                        out[[i, y[j]]] += 1.0;
                    }
                }
                out / *kk as f64
            }
            Fitted::Linear { weights, bias } => softmax_rows(&(x.dot(weights) + bias)),
            Fitted::Mlp(net) => softmax_rows(&net.predict(x)?),
            Fitted::GmmDensity { log_priors, models } => {
                let mut logits = Array2::<f64>::zeros((n, k));
                for (c, (lp, m)) in log_priors.iter().zip(models).enumerate() {
                    let ll = m.score_samples(x)?;
                    logits.column_mut(c).assign(&Array1::from_iter(ll.iter().map(|l| l + lp)));
                }
                softmax_rows(&logits)
            }
        };
        Ok(proba)
    }

    /// Probabilities spread over label indices `0..n_labels`; labels unseen
    /// in training get a zero column.
    pub fn predict_proba_full(&self, x: ArrayView2<f64>, n_labels: usize) -> Result<Array2<f64>> {
        let p = self.predict_proba(x)?;
        if let Some(&c) = self.classes.iter().find(|&&c| c >= n_labels) {
            return Err(Error::Shape(format!("class {c} outside label space of size {n_labels}")));
        }
        let mut out = Array2::<f64>::zeros((x.nrows(), n_labels));
        for (j, &c) in self.classes.iter().enumerate() {
            out.column_mut(c).assign(&p.column(j));
        }
        Ok(out)
    }

    /// Most probable label per row; ties resolve to the smaller label.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows().into_iter().map(|r| self.classes[crate::tabular::argmax(r.as_slice().expect("row-major"))]).collect())
    }
}
