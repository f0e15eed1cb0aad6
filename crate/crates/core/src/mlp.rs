//! Fully connected sigmoid networks trained by batch gradient descent with
//! momentum against a mean-squared-error goal.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigenspace::FeatureVector;
use crate::{Error, Result};

/// Layer sizes from input to output.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "a topology needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer sizes must be >= 1, got {layer_sizes:?}"
            )));
        }
        Ok(Topology { layer_sizes })
    }

    /// `[input, hidden..., output]`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Topology::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }
}

/// One weight layer: `w` is `fan_out x fan_in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            fan_in,
            fan_out,
            w: vec![0.0; fan_in * fan_out],
            b: vec![0.0; fan_out],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.w[row * self.fan_in + col]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    layers: Vec<Layer>,
}

/// Gradients share the weight layout.
pub type Gradients = Weights;

impl Weights {
    pub fn zeros(topology: &Topology) -> Self {
        Weights {
            layers: topology
                .layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Rebuilds weights from explicit layers, validating shapes and finiteness.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("weights need at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in == 0 || l.fan_out == 0 {
                return Err(Error::InvalidConfig(format!("layer {i} has a zero dimension")));
            }
            if l.w.len() != l.fan_in * l.fan_out {
                return Err(Error::dims(l.fan_in * l.fan_out, l.w.len()));
            }
            if l.b.len() != l.fan_out {
                return Err(Error::dims(l.fan_out, l.b.len()));
            }
            if i > 0 && layers[i - 1].fan_out != l.fan_in {
                return Err(Error::dims(layers[i - 1].fan_out, l.fan_in));
            }
            if !l.w.iter().chain(&l.b).all(|x| x.is_finite()) {
                return Err(Error::InvalidConfig(format!("layer {i} has non-finite entries")));
            }
        }
        Ok(Weights { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn topology(&self) -> Topology {
        let mut sizes = vec![self.layers[0].fan_in];
        sizes.extend(self.layers.iter().map(|l| l.fan_out));
        Topology { layer_sizes: sizes }
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    /// Every parameter in storage order (per layer: weights then biases).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        forward(self, x)
    }
}

/// Uniform draws from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; biases start at zero.
pub fn init_weights(topology: &Topology, seed: u64) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Weights::zeros(topology);
    for layer in &mut weights.layers {
        let bound = 1.0 / (layer.fan_in as f64).sqrt();
        for w in &mut layer.w {
            *w = rng.random_range(-bound..=bound);
        }
    }
    weights
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Result of a forward pass: `activations[0]` is the input and the last entry
/// is the network output.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub activations: Vec<Vec<f64>>,
}

impl Forward {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("forward keeps the input")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().expect("forward keeps the input")
    }
}

fn layer_forward(layer: &Layer, input: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &layer.w[r * layer.fan_in..(r + 1) * layer.fan_in];
        let z: f64 = layer.b[r] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        *o = sigmoid(z);
    }
}

pub fn forward(weights: &Weights, x: &[f64]) -> Result<Forward> {
    let input = weights.layers[0].fan_in;
    if x.len() != input {
        return Err(Error::dims(input, x.len()));
    }
    let mut activations = Vec::with_capacity(weights.layers.len() + 1);
    activations.push(x.to_vec());
    for layer in &weights.layers {
        let mut out = vec![0.0; layer.fan_out];
        layer_forward(layer, activations.last().expect("non-empty"), &mut out);
        activations.push(out);
    }
    Ok(Forward { activations })
}

/// One supervised training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: FeatureVector,
    pub target: Vec<f64>,
}

impl Example {
    pub fn new(input: impl Into<FeatureVector>, target: Vec<f64>) -> Self {
        Example {
            input: input.into(),
            target,
        }
    }
}

/// Mean over samples and output components of the squared error.
pub fn mse(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if outputs.len() != targets.len() {
        return Err(Error::dims(targets.len(), outputs.len()));
    }
    if outputs.is_empty() {
        return Err(Error::InsufficientData("mse of an empty batch".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (y, t) in outputs.iter().zip(targets) {
        if y.len() != t.len() {
            return Err(Error::dims(t.len(), y.len()));
        }
        sum += y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += y.len();
    }
    Ok(sum / count as f64)
}

fn check_batch(weights: &Weights, batch: &[Example]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty training batch".into()));
    }
    let topo = weights.topology();
    for ex in batch {
        if ex.input.len() != topo.input_size() {
            return Err(Error::dims(topo.input_size(), ex.input.len()));
        }
        if ex.target.len() != topo.output_size() {
            return Err(Error::dims(topo.output_size(), ex.target.len()));
        }
    }
    Ok(())
}

/// Scratch buffers reused across samples and epochs.
struct Workspace {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(topology: &Topology) -> Self {
        Workspace {
            activations: topology.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: topology.layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Batch MSE and its exact gradient, accumulated into `grad` (overwritten).
fn loss_and_gradients_into(
    weights: &Weights,
    batch: &[Example],
    ws: &mut Workspace,
    grad: &mut Gradients,
) -> f64 {
    grad.values_mut().for_each(|g| *g = 0.0);
    let n_layers = weights.layers.len();
    let out_size = weights.layers[n_layers - 1].fan_out;
    let scale = 2.0 / (batch.len() * out_size) as f64;
    let mut sse = 0.0;

    for ex in batch {
        ws.activations[0].copy_from_slice(ex.input.as_slice());
        for (l, layer) in weights.layers.iter().enumerate() {
            let (before, after) = ws.activations.split_at_mut(l + 1);
            layer_forward(layer, &before[l], &mut after[0]);
        }

        let y = &ws.activations[n_layers];
        let top = &mut ws.deltas[n_layers - 1];
        for ((d, &yi), &ti) in top.iter_mut().zip(y).zip(&ex.target) {
            let e = yi - ti;
            sse += e * e;
            *d = scale * e * yi * (1.0 - yi);
        }

        for l in (0..n_layers).rev() {
            let layer = &weights.layers[l];
            let input = &ws.activations[l];
            let g = &mut grad.layers[l];
            let delta = &ws.deltas[l];
            for (r, &dr) in delta.iter().enumerate() {
                g.b[r] += dr;
                let row = &mut g.w[r * layer.fan_in..(r + 1) * layer.fan_in];
                for (gw, &a) in row.iter_mut().zip(input) {
                    *gw += dr * a;
                }
            }
            if l > 0 {
                let (lower, upper) = ws.deltas.split_at_mut(l);
                let below = &mut lower[l - 1];
                let delta = &upper[0];
                for (c, db) in below.iter_mut().enumerate() {
                    let back: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(r, &dr)| dr * layer.weight(r, c))
                        .sum();
                    let a = input[c];
                    *db = back * a * (1.0 - a);
                }
            }
        }
    }
    sse / (batch.len() * out_size) as f64
}

/// Batch MSE of `weights` on `batch`.
pub fn batch_mse(weights: &Weights, batch: &[Example]) -> Result<f64> {
    check_batch(weights, batch)?;
    let outputs = batch
        .iter()
        .map(|ex| forward(weights, ex.input.as_slice()).map(Forward::into_output))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<Vec<f64>> = batch.iter().map(|ex| ex.target.clone()).collect();
    mse(&outputs, &targets)
}

/// Exact gradient of the batch MSE `(1 / (N * out)) * sum ||y - t||^2`.
pub fn gradients(weights: &Weights, batch: &[Example]) -> Result<Gradients> {
    check_batch(weights, batch)?;
    let topo = weights.topology();
    let mut grad = Weights::zeros(&topo);
    let mut ws = Workspace::new(&topo);
    loss_and_gradients_into(weights, batch, &mut ws, &mut grad);
    Ok(grad)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Training stops at the first epoch whose batch MSE is below this.
    pub goal: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Record every n-th epoch in the MSE history (the final epoch is always kept).
    pub history_stride: usize,
}

impl Default for TrainingConfig {
    /// Goal 1e-6 and a 700 000 epoch cap, with learning rate 0.05 and
    /// momentum 0.9.
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            goal: 1e-6,
            max_epochs: 700_000,
            seed: 0,
            history_stride: 1,
        }
    }
}

impl TrainingConfig {
    /// Desk-scale profile: goal 1e-3 within 20 000 epochs.
    pub fn desk() -> Self {
        TrainingConfig {
            goal: 1e-3,
            max_epochs: 20_000,
            ..TrainingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.goal > 0.0) {
            return bad(format!("goal must be positive, got {}", self.goal));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if self.history_stride == 0 {
            return bad("history stride must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTrace {
    pub epochs_run: usize,
    /// `(epoch, mse)` pairs, 1-based epochs, possibly subsampled.
    pub mse_history: Vec<(usize, f64)>,
    pub final_mse: f64,
    pub goal_met: bool,
    pub goal: f64,
    pub max_epochs: usize,
    pub wall_time: f64,
}

impl TrainingTrace {
    /// Equality ignoring wall-clock time.
    pub fn same_run(&self, other: &TrainingTrace) -> bool {
        TrainingTrace {
            wall_time: 0.0,
            ..self.clone()
        } == TrainingTrace {
            wall_time: 0.0,
            ..other.clone()
        }
    }
}

/// Trains a freshly initialized network on the whole batch.
///
/// Each epoch evaluates the batch MSE at the current weights; training stops
/// as soon as it is below `config.goal` or after `config.max_epochs`
/// evaluations. The returned weights are the ones that produced
/// `trace.final_mse`.
pub fn train(
    topology: &Topology,
    batch: &[Example],
    config: &TrainingConfig,
) -> Result<(Weights, TrainingTrace)> {
    config.validate()?;
    let weights = init_weights(topology, config.seed);
    train_from(weights, batch, config)
}

/// Like [`train`] but starting from the given weights.
pub fn train_from(
    mut weights: Weights,
    batch: &[Example],
    config: &TrainingConfig,
) -> Result<(Weights, TrainingTrace)> {
    config.validate()?;
    check_batch(&weights, batch)?;
    let started = Instant::now();
    let topo = weights.topology();
    let mut ws = Workspace::new(&topo);
    let mut grad = Weights::zeros(&topo);
    let mut velocity = Weights::zeros(&topo);
    let mut history = Vec::new();
    let mut final_mse = f64::NAN;
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        let loss = loss_and_gradients_into(&weights, batch, &mut ws, &mut grad);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epochs_run = epoch;
        final_mse = loss;
        let last = loss < config.goal || epoch == config.max_epochs;
        if (epoch - 1) % config.history_stride == 0 || last {
            history.push((epoch, loss));
        }
        if last {
            break;
        }
        for ((w, v), g) in weights
            .values_mut()
            .zip(velocity.values_mut())
            .zip(grad.values())
        {
            *v = config.momentum * *v - config.learning_rate * g;
            *w += *v;
        }
    }

    let trace = TrainingTrace {
        epochs_run,
        mse_history: history,
        final_mse,
        goal_met: final_mse < config.goal,
        goal: config.goal,
        max_epochs: config.max_epochs,
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok((weights, trace))
}
