//! Small feedforward regression network: `d -> 16 -> 16 -> 1`, rectifier
//! hidden layers, identity output, trained by mini-batch gradient descent on
//! the mean squared error of standardized targets.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::dataset::rng_from_seed;
use crate::error::{Error, Result};

pub const HIDDEN: [usize; 2] = [16, 16];

const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Update rule applied to each mini-batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// `v = momentum * v - step * g; p += v`.
    Momentum,
    /// Adam with beta1 = `momentum`, beta2 = 0.999, epsilon = 1e-8.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    /// Momentum coefficient (first-moment decay for Adam) in `[0, 1)`.
    #[serde(default)]
    pub momentum: f64,
    /// L2 penalty on weights (not biases), added to the loss as `decay * |w|^2 / 2`.
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_optimizer() -> Optimizer {
    Optimizer::Momentum
}

impl Default for NnParams {
    fn default() -> Self {
        NnParams {
            epochs: 1500,
            batch_size: 8,
            step_size: 0.002,
            optimizer: Optimizer::Adam,
            momentum: 0.9,
            weight_decay: 1e-3,
        }
    }
}

/// Dense layer with row-major `outputs x inputs` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let r = (6.0 / (inputs + outputs) as f64).sqrt();
        DenseLayer {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-r..=r)).collect(),
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.biases.iter().enumerate().map(|(o, b)| {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
        }));
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNetModel {
    pub input_dim: usize,
    pub layers: Vec<DenseLayer>,
    pub target_mean: f64,
    pub target_sd: f64,
}

struct Activations {
    /// Layer inputs; `inputs[0]` is the feature row.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
}

impl NeuralNetModel {
    /// Fresh network with seeded uniform weights and zero biases.
    pub fn initialize(input_dim: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut sizes = vec![input_dim];
        sizes.extend(HIDDEN);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], &mut rng))
            .collect();
        NeuralNetModel {
            input_dim,
            layers,
            target_mean: 0.0,
            target_sd: 1.0,
        }
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&inputs[l], &mut z);
            if l < last {
                inputs.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre.push(z);
        }
        Activations { inputs, pre }
    }

    /// Network output in standardized target units.
    pub fn raw_output(&self, x: &[f64]) -> f64 {
        self.forward(x).pre.last().expect("output layer")[0]
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        self.raw_output(x) * self.target_sd + self.target_mean
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector length");
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }

    /// Mean squared error of the raw output against standardized targets.
    pub fn batch_loss(&self, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
        let se: f64 = rows
            .iter()
            .zip(targets)
            .map(|(x, t)| (self.raw_output(x) - t).powi(2))
            .sum();
        se / rows.len() as f64
    }

    /// Gradient of [`batch_loss`](Self::batch_loss), laid out like [`parameters`](Self::parameters).
    pub fn batch_gradient(&self, rows: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
        let mut grads: Vec<DenseLayer> = self
            .layers
            .iter()
            .map(|l| DenseLayer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: vec![0.0; l.weights.len()],
                biases: vec![0.0; l.biases.len()],
            })
            .collect();
        self.accumulate_gradient(rows, targets, &mut grads);
        grads
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    fn accumulate_gradient<'a>(
        &self,
        rows: impl IntoIterator<Item = &'a Vec<f64>>,
        targets: impl IntoIterator<Item = &'a f64>,
        grads: &mut [DenseLayer],
    ) -> f64 {
        let pairs: Vec<_> = rows.into_iter().zip(targets).collect();
        let scale = 2.0 / pairs.len() as f64;
        let mut loss = 0.0;
        for (x, &t) in pairs.iter().copied() {
            let act = self.forward(x);
            let out = act.pre.last().unwrap()[0];
            loss += (out - t).powi(2);
            let mut delta = vec![scale * (out - t)];
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &act.inputs[l];
                let g = &mut grads[l];
                for (o, &d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, xi) in row.iter_mut().zip(input) {
                        *w += d * xi;
                    }
                }
                if l == 0 {
                    break;
                }
                let below = &act.pre[l - 1];
                delta = (0..layer.inputs)
                    .map(|i| {
                        if below[i] <= 0.0 {
                            0.0
                        } else {
                            delta
                                .iter()
                                .enumerate()
                                .map(|(o, d)| d * layer.weights[o * layer.inputs + i])
                                .sum()
                        }
                    })
                    .collect();
            }
        }
        loss / pairs.len() as f64
    }
}

struct OptimizerState {
    params: NnParams,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl OptimizerState {
    fn new(params: NnParams, n: usize) -> Self {
        OptimizerState {
            params,
            first: vec![0.0; n],
            second: vec![0.0; n],
            steps: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64]) {
        let NnParams {
            step_size: lr,
            momentum: b1,
            ..
        } = self.params;
        match self.params.optimizer {
            Optimizer::Momentum => {
                for ((p, g), v) in p.iter_mut().zip(g).zip(&mut self.first) {
                    *v = b1 * *v - lr * g;
                    *p += *v;
                }
            }
            Optimizer::Adam => {
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                self.steps = self.steps.saturating_add(1);
                let c1 = 1.0 - b1.powi(self.steps);
                let c2 = 1.0 - B2.powi(self.steps);
                for (((p, g), m), v) in p.iter_mut().zip(g).zip(&mut self.first).zip(&mut self.second) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = B2 * *v + (1.0 - B2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                }
            }
        }
    }
}

pub fn fit_nn(train: &TrainingSet, params: NnParams, seed: u64) -> Result<NeuralNetModel> {
    if train.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "neural net training needs at least 2 rows, got {}",
            train.len()
        )));
    }
    if params.batch_size == 0 || params.epochs == 0 || !(params.step_size > 0.0) {
        return Err(Error::InvalidParameter(
            "epochs, batch_size and step_size must be positive".into(),
        ));
    }
    if !(params.weight_decay >= 0.0 && params.weight_decay.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "weight_decay must be >= 0, got {}",
            params.weight_decay
        )));
    }
    if !(0.0..1.0).contains(&params.momentum) {
        return Err(Error::InvalidParameter(format!(
            "momentum must be in [0, 1), got {}",
            params.momentum
        )));
    }
    let n = train.len() as f64;
    let mean = train.targets.iter().sum::<f64>() / n;
    let var = train.targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let z: Vec<f64> = train.targets.iter().map(|t| (t - mean) / sd).collect();

    let mut net = NeuralNetModel::initialize(train.dimension(), seed);
    net.target_mean = mean;
    net.target_sd = sd;

    let mut rng = rng_from_seed(seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads: Vec<DenseLayer> = net.layers.clone();
    let mut state = OptimizerState::new(params, net.param_count());
    let mut flat = net.parameters();
    let mut grad = vec![0.0; flat.len()];
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            for g in grads.iter_mut() {
                g.weights.iter_mut().for_each(|w| *w = 0.0);
                g.biases.iter_mut().for_each(|b| *b = 0.0);
            }
            let loss = net.accumulate_gradient(
                batch.iter().map(|&i| &train.rows[i]),
                batch.iter().map(|&i| &z[i]),
                &mut grads,
            );
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let mut at = 0;
            for g in &grads {
                for (k, gw) in g.weights.iter().enumerate() {
                    grad[at + k] = gw + params.weight_decay * flat[at + k];
                }
                at += g.weights.len();
                grad[at..at + g.biases.len()].copy_from_slice(&g.biases);
                at += g.biases.len();
            }
            state.step(&mut flat, &grad);
            net.set_parameters(&flat);
        }
    }
    if net.parameters().iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence { epoch: params.epochs });
    }
    Ok(net)
}
