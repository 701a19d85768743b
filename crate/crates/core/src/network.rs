//! Feed-forward decision network.
//!
//! The first affine layer doubles as the feature transform `W·x + b` applied
//! to the normalized frame; hidden layers use ReLU and the output layer emits
//! raw logits, one per control action.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

/// One affine layer, weights stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParameters {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl NetworkParameters {
    /// Builds parameters from explicit layers, checking every invariant.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
        let mut layer_sizes = vec![first.inputs];
        layer_sizes.extend(layers.iter().map(|l| l.outputs));
        let params = Self {
            layer_sizes,
            layers,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        validate_sizes(&self.layer_sizes)?;
        if self.layers.len() + 1 != self.layer_sizes.len() {
            return Err(Error::Shape(format!(
                "{} layers for {} layer sizes",
                self.layers.len(),
                self.layer_sizes.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if layer.inputs != i
                || layer.outputs != o
                || layer.weights.len() != i * o
                || layer.bias.len() != o
            {
                return Err(Error::Shape(format!(
                    "layer {l} is {}x{} with {} weights and {} biases, expected {o}x{i}",
                    layer.outputs,
                    layer.inputs,
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            if !layer.weights.iter().chain(&layer.bias).all(|v| v.is_finite()) {
                return Err(Error::Numeric(format!("parameters of layer {l}")));
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All-zero parameters with the given shape.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers: layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        })
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Config("layer size list is empty".into()));
    }
    if sizes.len() < 3 {
        return Err(Error::Config(format!(
            "need a feature layer and an output layer, got sizes {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Config(format!("zero-width layer in {sizes:?}")));
    }
    Ok(())
}

/// Fan-in scaled uniform initialization: `U(-0.5, 0.5) / sqrt(fan_in)`, zero biases.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<NetworkParameters> {
    let mut params = NetworkParameters::zeros(layer_sizes)?;
    let mut rng = seeded(seed);
    for layer in &mut params.layers {
        let scale = 1.0 / libm::sqrt(layer.inputs as f64);
        for w in &mut layer.weights {
            *w = (rng.random::<f64>() - 0.5) * scale;
        }
    }
    Ok(params)
}

/// Everything backpropagation needs from a forward pass.
///
/// `activations[0]` is the input; `activations[l + 1]` is the output of layer
/// `l`. For the last layer the activation equals the pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &[f64] {
        self.pre_activations.last().unwrap()
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

#[inline]
pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

pub fn forward(params: &NetworkParameters, input: &[f64]) -> Result<ForwardTrace> {
    if input.len() != params.input_size() {
        return Err(Error::Shape(format!(
            "network expects {} inputs, got {}",
            params.input_size(),
            input.len()
        )));
    }
    let depth = params.layers.len();
    let mut pre_activations = Vec::with_capacity(depth);
    let mut activations = Vec::with_capacity(depth + 1);
    activations.push(input.to_vec());
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = Vec::with_capacity(layer.outputs);
        layer.affine(&activations[l], &mut z);
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("pre-activation of layer {l}")));
        }
        let a = if l + 1 == depth {
            z.clone()
        } else {
            z.iter().map(|&v| relu(v)).collect()
        };
        pre_activations.push(z);
        activations.push(a);
    }
    Ok(ForwardTrace {
        pre_activations,
        activations,
    })
}

/// Probabilities over the `K` control actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
}

/// Softmax with the maximum logit subtracted before exponentiation.
pub fn softmax(logits: &[f64]) -> Result<ClassDistribution> {
    if logits.is_empty() {
        return Err(Error::Shape("softmax of an empty logit vector".into()));
    }
    if !logits.iter().all(|z| z.is_finite()) {
        return Err(Error::Numeric("softmax logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(ClassDistribution { probs })
}

/// Index of the most probable action, lowest index on ties.
pub fn classify(dist: &ClassDistribution) -> usize {
    argmax(&dist.probs)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
