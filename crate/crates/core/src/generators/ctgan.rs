//! Conditional tabular GAN: mode-normalized continuous columns, a generator
//! conditioned on one categorical value per row, and a WGAN critic trained
//! with a gradient penalty.

use std::io::{Read, Write};

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{Activation, AdamConfig, AdamState, Loss, Mlp, RngStream, StreamRng};
use crate::tabular::{Dataset, Schema};

use super::condvec::{CondSampler, Condition};
use super::transform::{DataTransformer, Head, OutputSpan};

pub const MODEL_FORMAT: &str = "synthlab-ctgan";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtganConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub max_modes: usize,
    pub gp_lambda: f64,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    /// Gumbel-softmax temperature for discrete heads during training.
    pub tau: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for CtganConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 200,
            lr: 1e-3,
            noise_dim: 128,
            generator_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            max_modes: 5,
            gp_lambda: 10.0,
            critic_steps: 5,
            tau: 0.2,
            beta1: 0.5,
            beta2: 0.9,
        }
    }
}

impl CtganConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return invalid("iterations must be at least 1");
        }
        if self.batch_size == 0 || !self.batch_size.is_multiple_of(2) {
            return invalid("batch_size must be a positive even number");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return invalid("lr must be positive");
        }
        if self.noise_dim == 0 || self.max_modes == 0 || self.critic_steps == 0 {
            return invalid("noise_dim, max_modes and critic_steps must be at least 1");
        }
        if self.generator_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return invalid("hidden layer sizes must be positive");
        }
        if !(self.tau > 0.0 && self.gp_lambda >= 0.0) {
            return invalid("tau must be positive and gp_lambda non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return invalid("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// `mean D(fake) - mean D(real)`.
    pub critic_loss: f64,
    pub gradient_penalty: f64,
    /// `-mean D(fake)` on the generator step.
    pub generator_loss: f64,
    /// Cross-entropy of the conditioned block.
    pub cond_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtganModel {
    pub schema: Schema,
    pub config: CtganConfig,
    pub transformer: DataTransformer,
    pub cond: CondSampler,
    pub generator: Mlp,
    pub critic: Mlp,
    pub training_log: Vec<IterationLog>,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Applies the output heads. Softmax heads use Gumbel noise when `gumbel`
/// carries a generator and temperature.
fn activate(raw: &Array2<f64>, spans: &[OutputSpan], mut gumbel: Option<(&mut StreamRng, f64)>) -> Array2<f64> {
    let mut out = raw.clone();
    for mut row in out.rows_mut() {
        let row = row.as_slice_mut().expect("standard layout");
        for span in spans {
            let block = &mut row[span.start..span.start + span.width];
            match span.head {
                Head::Tanh => block.iter_mut().for_each(|x| *x = x.tanh()),
                Head::Softmax => {
                    if let Some((rng, tau)) = gumbel.as_mut() {
                        for x in block.iter_mut() {
                            let u: f64 = rng.random();
                            let g = -(-(u.max(1e-300)).ln()).ln();
                            *x = (*x + g) / *tau;
                        }
                    }
                    softmax_in_place(block);
                }
            }
        }
    }
    out
}

/// Chains `d loss / d activated` back to the raw outputs.
fn activate_backward(act: &Array2<f64>, grad_act: ArrayView2<f64>, spans: &[OutputSpan], tau: f64) -> Array2<f64> {
    let mut grad = grad_act.to_owned();
    for (mut g, a) in grad.rows_mut().into_iter().zip(act.rows()) {
        for span in spans {
            let range = span.start..span.start + span.width;
            match span.head {
                Head::Tanh => {
                    for j in range {
                        g[j] *= 1.0 - a[j] * a[j];
                    }
                }
                Head::Softmax => {
                    let dot: f64 = range.clone().map(|j| g[j] * a[j]).sum();
                    for j in range {
                        g[j] = a[j] * (g[j] - dot) / tau;
                    }
                }
            }
        }
    }
    grad
}

fn noise(rng: &mut StreamRng, rows: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, dim), || rng.sample(StandardNormal))
}

fn cond_matrix(conds: &[Option<Condition>], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((conds.len(), width));
    for (i, c) in conds.iter().enumerate() {
        if let Some(c) = c {
            m.row_mut(i).assign(&ndarray::ArrayView1::from(&c.vector));
        }
    }
    m
}

fn hstack(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("row counts match")
}

fn at_iteration(it: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Numerical(format!("training diverged at iteration {it}: {e}"))
}

/// Fits the conditional GAN on `train`, which must have no missing cells.
pub fn ctgan_fit(train: &Dataset, config: &CtganConfig, seed: u64) -> Result<CtganModel> {
    config.validate()?;
    if train.n_rows() == 0 {
        return invalid("cannot fit a generator on an empty dataset");
    }
    let stream = RngStream::new(seed).child("ctgan");
    let transformer = DataTransformer::fit(train, config.max_modes, &stream.child("modes"))?;
    let data = transformer.transform(train, &stream.child("transform"))?;
    let cond = CondSampler::fit(train)?;
    let spans = transformer.spans();
    let offsets = transformer.column_offsets();
    let data_width = transformer.width();
    let b = config.batch_size;
    let bf = b as f64;

    let mut g_sizes = vec![config.noise_dim + cond.width];
    g_sizes.extend(&config.generator_hidden);
    g_sizes.push(data_width);
    let mut generator = Mlp::new(&g_sizes, Activation::Relu, Activation::Identity, &mut stream.child("generator").rng());
    let mut d_sizes = vec![data_width + cond.width];
    d_sizes.extend(&config.critic_hidden);
    d_sizes.push(1);
    let mut critic = Mlp::new(&d_sizes, Activation::LeakyRelu, Activation::Identity, &mut stream.child("critic").rng());

    let adam = AdamConfig { lr: config.lr, beta1: config.beta1, beta2: config.beta2, ..AdamConfig::default() };
    let sizes = |net: &mut Mlp| net.param_slices_mut().iter().map(|s| s.len()).collect::<Vec<_>>();
    let mut g_state = AdamState::new(sizes(&mut generator));
    let mut d_state = AdamState::new(sizes(&mut critic));
    let critic_weights: Vec<f64> = (0..2 * b).map(|i| if i < b { 2.0 } else { -2.0 }).collect();
    let mut rng = stream.child("train").rng();
    let mut training_log = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let fail = at_iteration(it);

        let mut critic_loss = 0.0;
        let mut gradient_penalty = 0.0;
        for _ in 0..config.critic_steps {
            let z = noise(&mut rng, b, config.noise_dim);
            let conds: Vec<Option<Condition>> = (0..b).map(|_| cond.sample_training(&mut rng)).collect();
            let c = cond_matrix(&conds, cond.width);
            let raw = generator.predict(hstack(z.view(), c.view()).view()).map_err(&fail)?;
            let fake = activate(&raw, &spans, Some((&mut rng, config.tau)));
            let rows: Vec<usize> = conds
                .iter()
                .map(|cd| match cd {
                    Some(cd) => cond.matching_row(cd, &mut rng),
                    None => rng.random_range(0..data.nrows()),
                })
                .collect();
            let real = data.select(Axis(0), &rows);
            let fake_in = hstack(fake.view(), c.view());
            let real_in = hstack(real.view(), c.view());
            let both = concatenate(Axis(0), &[fake_in.view(), real_in.view()]).expect("equal widths");
            let (loss, mut d_grads) = critic.loss_and_grad(both.view(), Loss::Critic(&critic_weights)).map_err(&fail)?;
            let mut interp = real_in.clone();
            for (mut row, f) in interp.rows_mut().into_iter().zip(fake_in.rows()) {
                let eps: f64 = rng.random();
                row.zip_mut_with(&f, |r, &fv| *r = eps * *r + (1.0 - eps) * fv);
            }
            let (penalty, gp_grads) = critic.gradient_penalty(interp.view(), config.gp_lambda).map_err(&fail)?;
            d_grads.add_assign(&gp_grads);
            d_state.step(&adam, &mut critic.param_slices_mut(), &d_grads.slices()).map_err(&fail)?;
            critic_loss = loss;
            gradient_penalty = penalty;
        }

        // generator step
        let z = noise(&mut rng, b, config.noise_dim);
        let conds: Vec<Option<Condition>> = (0..b).map(|_| cond.sample_training(&mut rng)).collect();
        let c = cond_matrix(&conds, cond.width);
        let g_fwd = generator.forward(hstack(z.view(), c.view()).view()).map_err(&fail)?;
        let fake = activate(&g_fwd.output, &spans, Some((&mut rng, config.tau)));
        let d_fwd = critic.forward(hstack(fake.view(), c.view()).view()).map_err(&fail)?;
        let generator_loss = -d_fwd.output.sum() / bf;
        let (_, d_input) = critic.backward(&d_fwd, &Array2::from_elem((b, 1), -1.0 / bf));
        let mut grad_raw = activate_backward(&fake, d_input.slice(ndarray::s![.., ..data_width]), &spans, config.tau);
        let mut cond_loss = 0.0;
        for (i, cd) in conds.iter().enumerate() {
            let Some(cd) = cd else { continue };
            let start = offsets[cond.blocks[cd.block].column];
            let width = cond.blocks[cd.block].counts.len();
            let mut p = g_fwd.output.slice(ndarray::s![i, start..start + width]).to_vec();
            softmax_in_place(&mut p);
            cond_loss -= p[cd.category].max(f64::MIN_POSITIVE).ln() / bf;
            for (j, pj) in p.iter().enumerate() {
                grad_raw[[i, start + j]] += (pj - f64::from(u8::from(j == cd.category))) / bf;
            }
        }
        let (g_grads, _) = generator.backward(&g_fwd, &grad_raw);
        g_state.step(&adam, &mut generator.param_slices_mut(), &g_grads.slices()).map_err(&fail)?;

        let entry = IterationLog { iteration: it, critic_loss, gradient_penalty, generator_loss, cond_loss };
        if ![critic_loss, gradient_penalty, generator_loss, cond_loss].iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite loss at iteration {it}: {entry:?}")));
        }
        training_log.push(entry);
    }

    Ok(CtganModel { schema: train.schema().clone(), config: config.clone(), transformer, cond, generator, critic, training_log })
}

impl CtganModel {
    fn generate(&self, n: usize, rng: &mut StreamRng, mut condition: impl FnMut(&mut StreamRng) -> Option<Condition>) -> Result<Dataset> {
        if n == 0 {
            return invalid("sample size must be at least 1");
        }
        let spans = self.transformer.spans();
        let mut out = Array2::<f64>::zeros((n, self.transformer.width()));
        let mut done = 0;
        while done < n {
            let rows = self.config.batch_size.min(n - done);
            let z = noise(rng, rows, self.config.noise_dim);
            let conds: Vec<Option<Condition>> = (0..rows).map(|_| condition(rng)).collect();
            let c = cond_matrix(&conds, self.cond.width);
            let raw = self.generator.predict(hstack(z.view(), c.view()).view())?;
            // argmax decoding makes the softmax itself unnecessary
            let act = activate(&raw, &spans, None);
            out.slice_mut(ndarray::s![done..done + rows, ..]).assign(&act);
            done += rows;
        }
        self.transformer.inverse(&self.schema, out.view())
    }

    /// Draws `n` rows with conditions following the observed category frequencies.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = RngStream::new(seed).child("ctgan-sample").rng();
        self.generate(n, &mut rng, |r| self.cond.sample_generation(r))
    }

    /// Draws `n` rows all conditioned on `column = category`.
    pub fn sample_conditioned(&self, n: usize, column: &str, category: &str, seed: u64) -> Result<Dataset> {
        let col = self
            .schema
            .index_of(column)
            .ok_or_else(|| Error::Schema(format!("unknown column {column:?}")))?;
        let block = self
            .cond
            .blocks
            .iter()
            .position(|b| b.column == col)
            .ok_or_else(|| Error::Schema(format!("column {column:?} is not categorical")))?;
        let cat = self
            .schema
            .column(col)
            .category_index(category)
            .ok_or_else(|| Error::Schema(format!("unknown category {category:?} in {column:?}")))?;
        let mut vector = vec![0.0; self.cond.width];
        vector[self.cond.blocks[block].offset + cat] = 1.0;
        let fixed = Condition { block, category: cat, vector };
        let mut rng = RngStream::new(seed).child("ctgan-sample").rng();
        self.generate(n, &mut rng, |_| Some(fixed.clone()))
    }

    pub fn save<W: Write>(&self, sink: W) -> Result<()> {
        let file = ModelFileRef { format: MODEL_FORMAT, version: MODEL_VERSION, model: self };
        serde_json::to_writer(sink, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(source)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidInput(format!("not a generator model file (format {:?})", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model version {}", file.version)));
        }
        let m = file.model;
        m.config.validate()?;
        if m.generator.input_size() != m.config.noise_dim + m.cond.width
            || m.generator.output_size() != m.transformer.width()
            || m.transformer.columns.len() != m.schema.len()
        {
            return Err(Error::Shape("model components have inconsistent sizes".into()));
        }
        Ok(m)
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a CtganModel,
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: CtganModel,
}

/// Free-function form of [`CtganModel::sample`].
pub fn ctgan_sample(model: &CtganModel, n: usize, seed: u64) -> Result<Dataset> {
    model.sample(n, seed)
}
