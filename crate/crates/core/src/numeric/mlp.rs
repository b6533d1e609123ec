//! Fully connected networks with hand-derived gradients.
//!
//! Rows are samples. A layer computes `z = h W + b` with `W` stored as
//! `(inputs × outputs)`, then applies its activation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - h * h,
            Activation::Identity => 1.0,
        }
    }

    fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LayerDoc>", into = "Vec<LayerDoc>")]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Serialized layer: weights flattened row-major as `(inputs × outputs)`.
#[derive(Serialize, Deserialize)]
struct LayerDoc {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<Mlp> for Vec<LayerDoc> {
    fn from(net: Mlp) -> Self {
        net.layers
            .into_iter()
            .map(|l| LayerDoc {
                inputs: l.weights.nrows(),
                outputs: l.weights.ncols(),
                activation: l.activation,
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect()
    }
}

impl TryFrom<Vec<LayerDoc>> for Mlp {
    type Error = Error;

    fn try_from(docs: Vec<LayerDoc>) -> Result<Self> {
        let layers = docs
            .into_iter()
            .map(|d| {
                let weights = Array2::from_shape_vec((d.inputs, d.outputs), d.weights)
                    .map_err(|e| Error::Shape(format!("layer weights: {e}")))?;
                if d.bias.len() != d.outputs {
                    return Err(Error::Shape("layer bias length differs from its output count".into()));
                }
                Ok(Dense { weights, bias: Array1::from(d.bias), activation: d.activation })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Mlp::from_layers(layers)?;
        if !net.all_finite() {
            return Err(Error::Numerical("network parameters are not finite".into()));
        }
        Ok(net)
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Input of each layer (`inputs[0]` is the batch itself).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    /// Flat views in the same order as [`Mlp::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| [w.as_slice().expect("standard layout"), b.as_slice().expect("standard layout")])
            .collect()
    }
}

/// Training objectives on the network output.
#[derive(Debug, Clone, Copy)]
pub enum Loss<'a> {
    /// Softmax over the outputs, mean negative log-likelihood of the labels.
    CrossEntropy(&'a [usize]),
    /// Mean over all entries of the squared error.
    Mse(ArrayView2<'a, f64>),
    /// Single-output head: `mean_i(weights[i] * out_i)`. A WGAN critic uses
    /// `+1` for generated rows and `-1` for real rows.
    Critic(&'a [f64]),
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.ncols() != l.bias.len() {
                return Err(Error::Shape(format!("layer {i}: bias length differs from output width")));
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(Error::Shape(format!("layer {i}: input width does not chain")));
            }
        }
        Ok(Self { layers })
    }

    /// Random network with uniform `±1/sqrt(fan_in)` initialisation.
    /// `sizes` lists every width from input to output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let activation = if i + 2 == sizes.len() { output } else { hidden };
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound)),
                    bias: Array1::from_shape_simple_fn(w[1], || rng.random_range(-bound..bound)),
                    activation,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").weights.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_size() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_size()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Forward> {
        self.check_input(&batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = batch.to_owned();
        for layer in &self.layers {
            let z = h.dot(&layer.weights) + &layer.bias;
            let act = layer.activation;
            let next = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(Forward { inputs, pre, output: h })
    }

    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut h = batch.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            h = (h.dot(&layer.weights) + &layer.bias).mapv_into(|v| act.apply(v));
        }
        Ok(h)
    }

    /// Backpropagates `d loss / d output` through the cached pass. Returns
    /// parameter gradients and the gradient with respect to the input batch.
    pub fn backward(&self, fwd: &Forward, grad_output: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut bias = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out = if l + 1 == self.layers.len() { &fwd.output } else { &fwd.inputs[l + 1] };
            let act = layer.activation;
            let mut delta = upstream;
            Zip::from(&mut delta)
                .and(&fwd.pre[l])
                .and(out)
                .for_each(|d, &z, &h| *d *= act.derivative(z, h));
            weights.push(standard(fwd.inputs[l].t().dot(&delta)));
            bias.push(delta.sum_axis(Axis(0)));
            upstream = delta.dot(&layer.weights.t());
        }
        weights.reverse();
        bias.reverse();
        (MlpGrads { weights, bias }, upstream)
    }

    /// Loss value and its gradient with respect to the output.
    pub fn output_loss(&self, output: &Array2<f64>, loss: Loss<'_>) -> Result<(f64, Array2<f64>)> {
        let n = output.nrows();
        if n == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        let nf = n as f64;
        match loss {
            Loss::CrossEntropy(labels) => {
                if labels.len() != n {
                    return Err(Error::Shape("label count differs from batch size".into()));
                }
                let k = output.ncols();
                let mut probs = softmax_rows(output);
                let mut total = 0.0;
                for (i, &y) in labels.iter().enumerate() {
                    if y >= k {
                        return Err(Error::Shape(format!("label {y} out of range for {k} outputs")));
                    }
                    total -= probs[[i, y]].max(f64::MIN_POSITIVE).ln();
                    probs[[i, y]] -= 1.0;
                }
                probs.mapv_inplace(|g| g / nf);
                Ok((total / nf, probs))
            }
            Loss::Mse(target) => {
                if target.dim() != output.dim() {
                    return Err(Error::Shape("target shape differs from output".into()));
                }
                let m = output.len() as f64;
                let diff = output - &target;
                let value = diff.iter().map(|d| d * d).sum::<f64>() / m;
                Ok((value, diff.mapv(|d| 2.0 * d / m)))
            }
            Loss::Critic(w) => {
                if output.ncols() != 1 || w.len() != n {
                    return Err(Error::Shape("critic loss needs a single-output head and one weight per row".into()));
                }
                let value = output.column(0).iter().zip(w).map(|(o, w)| o * w).sum::<f64>() / nf;
                let grad = Array2::from_shape_fn((n, 1), |(i, _)| w[i] / nf);
                Ok((value, grad))
            }
        }
    }

    pub fn loss_and_grad(&self, batch: ArrayView2<f64>, loss: Loss<'_>) -> Result<(f64, MlpGrads)> {
        let fwd = self.forward(batch)?;
        let (value, grad_out) = self.output_loss(&fwd.output, loss)?;
        let (grads, _) = self.backward(&fwd, &grad_out);
        Ok((value, grads))
    }

    /// Gradient of the scalar output with respect to each input row.
    pub fn input_gradients(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        let fwd = self.forward(batch)?;
        let ones = Array2::ones(fwd.output.raw_dim());
        Ok(self.backward(&fwd, &ones).1)
    }

    /// Gradient penalty `lambda * mean_i (|d out_i / d x_i| - 1)^2` and its
    /// exact gradient with respect to every parameter.
    ///
    /// Requires a single-output network whose activations are piecewise
    /// linear, so that second derivatives vanish almost everywhere and the
    /// penalty gradient reduces to one extra pass through the weights.
    pub fn gradient_penalty(&self, batch: ArrayView2<f64>, lambda: f64) -> Result<(f64, MlpGrads)> {
        if self.output_size() != 1 {
            return Err(Error::Shape("gradient penalty needs a single-output network".into()));
        }
        if !self.layers.iter().all(|l| l.activation.is_piecewise_linear()) {
            return Err(Error::InvalidInput("gradient penalty needs piecewise-linear activations".into()));
        }
        let fwd = self.forward(batch)?;
        let n = batch.nrows();
        let nf = n as f64;
        let n_layers = self.layers.len();

        // d_l[i, k]: activation slope of unit k in layer l for row i
        let slopes: Vec<Array2<f64>> = self
            .layers
            .iter()
            .zip(&fwd.pre)
            .map(|(layer, z)| {
                let act = layer.activation;
                z.mapv(|v| act.derivative(v, act.apply(v)))
            })
            .collect();

        // deltas[l] = d out / d z_l, built top-down from d out / d h_L = 1
        let mut deltas: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
        let mut a = Array2::<f64>::ones((n, 1));
        for l in (0..n_layers).rev() {
            let delta = &a * &slopes[l];
            a = delta.dot(&self.layers[l].weights.t());
            deltas[l] = delta;
        }
        let grad_x = a;

        let mut penalty = 0.0;
        let mut a_bar = Array2::<f64>::zeros(grad_x.raw_dim());
        for (i, row) in grad_x.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            penalty += (norm - 1.0).powi(2);
            if norm > 0.0 {
                let scale = 2.0 * lambda * (norm - 1.0) / norm / nf;
                a_bar.row_mut(i).assign(&row.mapv(|g| g * scale));
            }
        }
        penalty *= lambda / nf;

        let mut weights = vec![Array2::zeros((0, 0)); n_layers];
        for l in 0..n_layers {
            let w = &self.layers[l].weights;
            // a_{l-1} = delta_l W_l^T
            weights[l] = standard(a_bar.t().dot(&deltas[l]));
            if l + 1 < n_layers {
                let delta_bar = a_bar.dot(w);
                a_bar = delta_bar * &slopes[l];
            }
        }
        let bias = self.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect();
        Ok((penalty, MlpGrads { weights, bias }))
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
