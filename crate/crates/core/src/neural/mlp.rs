use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classifiers::Classifier;
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::neural::{log_sum_exp, softmax, DifferentiableModel};
use crate::rng::{rng_from_seed, split_seed};

/// Fully connected layer `z = W a + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + w.iter().zip(a).map(|(p, q)| p * q).sum::<f64>());
        }
    }

    /// `W^T delta`
    fn transpose_apply(&self, delta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.inputs];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += wi * d;
            }
        }
        g
    }
}

/// Sigmoid hidden layers, linear logits, softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::invalid(
            "an MLP needs at least input and output sizes",
        ));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "layer sizes must be positive: {sizes:?}"
        )));
    }
    if *sizes.last().unwrap() < 2 {
        return Err(Error::invalid("an MLP needs at least two output classes"));
    }
    Ok(())
}

impl MlpModel {
    /// All weights and biases zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        validate_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(sizes)?;
        let mut rng = rng_from_seed(seed);
        for layer in &mut model.layers {
            let a = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-a..a);
            }
        }
        Ok(model)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let mut sizes = Vec::with_capacity(layers.len() + 1);
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid(format!(
                    "layer {i} has inconsistent parameter shapes"
                )));
            }
            if i == 0 {
                sizes.push(l.inputs);
            } else if l.inputs != sizes[i] {
                return Err(Error::DimensionMismatch {
                    expected: sizes[i],
                    got: l.inputs,
                });
            }
            sizes.push(l.outputs);
        }
        validate_sizes(&sizes)?;
        let model = Self { sizes, layers };
        if !model.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Activations of every layer; the last entry holds the logits.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.apply(acts.last().unwrap(), &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits_checked(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.sizes[0], x.len())?;
        Ok(self.trace(x).pop().unwrap())
    }

    /// `(logits, softmax(logits))`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.logits_checked(x)?;
        let p = softmax(&z);
        Ok((z, p))
    }

    /// Backpropagates `upstream` (a gradient w.r.t. the logits) to the input,
    /// accumulating parameter gradients into `grads` when given.
    fn backward(
        &self,
        acts: &[Vec<f64>],
        upstream: &[f64],
        mut grads: Option<&mut [Layer]>,
    ) -> Vec<f64> {
        let mut delta = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            if let Some(g) = grads.as_deref_mut() {
                let g = &mut g[i];
                for (o, &d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, a) in row.iter_mut().zip(input) {
                        *w += d * a;
                    }
                }
            }
            let mut back = layer.transpose_apply(&delta);
            if i > 0 {
                // input to this layer is a sigmoid activation
                for (b, a) in back.iter_mut().zip(input) {
                    *b *= a * (1.0 - a);
                }
            }
            delta = back;
        }
        delta
    }
}

impl Classifier for MlpModel {
    fn dim(&self) -> usize {
        self.sizes[0]
    }

    fn num_classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Arg-max of the logits; ties go to the lowest class.
    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        (self.num_classes() == 2).then(|| softmax(&self.logits(x))[1])
    }
}

impl DifferentiableModel for MlpModel {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).pop().unwrap()
    }

    fn logit_vjp(&self, x: &[f64], upstream: &[f64]) -> Vec<f64> {
        let acts = self.trace(x);
        self.backward(&acts, upstream, None)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Minibatch SGD on mean cross-entropy. Returns the model and the mean
/// training loss of every epoch.
pub fn mlp_train(train: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let mut sizes = vec![train.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(train.num_classes());
    let mut model = MlpModel::glorot(&sizes, split_seed(cfg.seed, 0))?;
    let mut rng = rng_from_seed(split_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads: Vec<Layer> = model
        .layers
        .iter()
        .map(|l| Layer::zeros(l.inputs, l.outputs))
        .collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for g in &mut grads {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.bias.iter_mut().for_each(|v| *v = 0.0);
            }
            for &i in batch {
                let acts = model.trace(train.row(i));
                let z = acts.last().unwrap();
                let y = train.label(i);
                total += log_sum_exp(z) - z[y];
                let mut up = softmax(z);
                up[y] -= 1.0;
                model.backward(&acts, &up, Some(&mut grads));
            }
            let step = cfg.learning_rate / batch.len() as f64;
            if step != 0.0 {
                for (layer, g) in model.layers.iter_mut().zip(&grads) {
                    for (w, d) in layer.weights.iter_mut().zip(&g.weights) {
                        *w -= step * d;
                    }
                    for (b, d) in layer.bias.iter_mut().zip(&g.bias) {
                        *b -= step * d;
                    }
                }
            }
        }
        let loss = total / train.len() as f64;
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        trace.push(loss);
    }
    Ok((model, trace))
}
