//! Reward shaping, discounted returns and gradient-descent training of the
//! decision network.
//!
//! Each output logit `z_k` is regressed toward the discounted return observed
//! after taking action `k`, with loss `½(z_a − G)²` on the taken action only.
//! Action selection reads the same logits through softmax/argmax.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::{classify, forward, ClassDistribution, ForwardTrace, NetworkParameters};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_features: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha: 0.01,
            epochs: 5,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        validate_gamma(self.gamma)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub error: f64,
    pub energy: f64,
    pub fault: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            error: 1.0,
            energy: 0.1,
            fault: 0.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.error, self.energy, self.fault]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::Config(format!("reward weights must be >= 0, got {self:?}")))
        }
    }
}

/// `r = −(w_e·e² + w_p·ΔE + w_f·[fault unrecovered])`.
pub fn step_reward(
    tracking_error: f64,
    energy_increment: f64,
    fault_unrecovered: bool,
    weights: &RewardWeights,
) -> f64 {
    let fault = if fault_unrecovered { 1.0 } else { 0.0 };
    -(weights.error * tracking_error * tracking_error
        + weights.energy * energy_increment
        + weights.fault * fault)
}

/// `G_t = r_t + γ·G_{t+1}`, with `G = 0` past the end of the sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<Vec<f64>> {
    validate_gamma(gamma)?;
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        g = r + gamma * g;
        out[t] = g;
    }
    Ok(out)
}

/// Returns for a transition sequence, restarting after every terminal step.
pub fn transition_returns(transitions: &[Transition], gamma: f64) -> Result<Vec<f64>> {
    validate_gamma(gamma)?;
    let mut out = vec![0.0; transitions.len()];
    let mut g = 0.0;
    for (t, tr) in transitions.iter().enumerate().rev() {
        if tr.terminal {
            g = 0.0;
        }
        g = tr.reward + gamma * g;
        out[t] = g;
    }
    Ok(out)
}

pub fn mse_loss(y_pred: f64, y_true: f64) -> f64 {
    let r = y_pred - y_true;
    0.5 * r * r
}

/// Per-layer gradients, laid out exactly like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParameters) -> Self {
        Self {
            weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flatten().chain(self.bias.iter().flatten())
    }

    fn matches(&self, params: &NetworkParameters) -> bool {
        self.weights.len() == params.layers.len()
            && self.bias.len() == params.layers.len()
            && params.layers.iter().enumerate().all(|(l, layer)| {
                self.weights[l].len() == layer.weights.len() && self.bias[l].len() == layer.bias.len()
            })
    }
}

/// Exact gradient of `½(z_action − target)²` by reverse accumulation.
///
/// ReLU contributes derivative 1 where the pre-activation is strictly
/// positive and 0 elsewhere (including exactly 0).
pub fn backward(
    params: &NetworkParameters,
    trace: &ForwardTrace,
    action: usize,
    target: f64,
) -> Result<GradientSet> {
    let depth = params.layers.len();
    if trace.pre_activations.len() != depth || trace.activations.len() != depth + 1 {
        return Err(Error::Gradient(format!(
            "trace has {} layers, network has {depth}",
            trace.pre_activations.len()
        )));
    }
    for (l, layer) in params.layers.iter().enumerate() {
        if trace.activations[l].len() != layer.inputs || trace.pre_activations[l].len() != layer.outputs {
            return Err(Error::Gradient(format!("trace does not match layer {l}")));
        }
    }
    let outputs = params.output_size();
    if action >= outputs {
        return Err(Error::Action {
            index: action,
            actions: outputs,
        });
    }

    let mut grads = GradientSet::zeros_like(params);
    let mut delta = vec![0.0; outputs];
    delta[action] = trace.logits()[action] - target;

    for l in (0..depth).rev() {
        let layer = &params.layers[l];
        let input = &trace.activations[l];
        let gw = &mut grads.weights[l];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
            for (g, x) in row.iter_mut().zip(input) {
                *g = d * x;
            }
        }
        grads.bias[l].copy_from_slice(&delta);
        if l == 0 {
            break;
        }
        let below = &trace.pre_activations[l - 1];
        let mut next = vec![0.0; layer.inputs];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (n, w) in next.iter_mut().zip(row) {
                *n += w * d;
            }
        }
        for (n, &z) in next.iter_mut().zip(below) {
            if z <= 0.0 {
                *n = 0.0;
            }
        }
        delta = next;
    }

    if !grads.iter().all(|g| g.is_finite()) {
        return Err(Error::Numeric("gradient".into()));
    }
    Ok(grads)
}

/// `W ← W − α·∇`, returning the updated copy.
pub fn sgd_step(params: &NetworkParameters, grads: &GradientSet, alpha: f64) -> Result<NetworkParameters> {
    let mut next = params.clone();
    sgd_step_in_place(&mut next, grads, alpha)?;
    Ok(next)
}

pub fn sgd_step_in_place(params: &mut NetworkParameters, grads: &GradientSet, alpha: f64) -> Result<()> {
    if !grads.matches(params) {
        return Err(Error::Gradient("gradient shapes differ from parameters".into()));
    }
    for (l, layer) in params.layers.iter_mut().enumerate() {
        for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
            *w -= alpha * g;
        }
        for (b, g) in layer.bias.iter_mut().zip(&grads.bias[l]) {
            *b -= alpha * g;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub params: NetworkParameters,
    /// Mean per-sample loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    pub updates: usize,
}

pub fn train_policy(
    params: &NetworkParameters,
    episodes: &[Vec<Transition>],
    config: &TrainingConfig,
) -> Result<NetworkParameters> {
    train_policy_report(params, episodes, config).map(|r| r.params)
}

/// Regresses the taken action's logit toward its discounted return for every
/// transition, `epochs` times. Sample order is reshuffled each epoch from
/// `config.seed`, so identical inputs give identical parameters.
pub fn train_policy_report(
    params: &NetworkParameters,
    episodes: &[Vec<Transition>],
    config: &TrainingConfig,
) -> Result<TrainingReport> {
    config.validate()?;
    let k = params.output_size();
    let n = params.input_size();
    let mut samples = Vec::new();
    for (e, episode) in episodes.iter().enumerate() {
        let returns = transition_returns(episode, config.gamma)?;
        for (t, (tr, g)) in episode.iter().zip(returns).enumerate() {
            if tr.action >= k {
                return Err(Error::Action {
                    index: tr.action,
                    actions: k,
                });
            }
            if tr.features.len() != n {
                return Err(Error::Shape(format!(
                    "transition {t} of episode {e} has {} features, network expects {n}",
                    tr.features.len()
                )));
            }
            samples.push((e, t, g));
        }
    }

    let mut current = params.clone();
    let mut rng = seeded(config.seed);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut updates = 0;
    for epoch in 0..config.epochs {
        samples.shuffle(&mut rng);
        let mut total = 0.0;
        for (i, &(e, t, g)) in samples.iter().enumerate() {
            let tr = &episodes[e][t];
            let trace = forward(&current, &tr.features).map_err(|_| Error::TrainingDivergence {
                epoch,
                sample: i,
                loss: f64::NAN,
            })?;
            let loss = mse_loss(trace.logits()[tr.action], g);
            if !loss.is_finite() {
                return Err(Error::TrainingDivergence {
                    epoch,
                    sample: i,
                    loss,
                });
            }
            total += loss;
            let grads = backward(&current, &trace, tr.action, g)?;
            sgd_step_in_place(&mut current, &grads, config.alpha)?;
            updates += 1;
        }
        epoch_losses.push(if samples.is_empty() {
            0.0
        } else {
            total / samples.len() as f64
        });
    }
    Ok(TrainingReport {
        params: current,
        epoch_losses,
        updates,
    })
}

/// ε-greedy selection over [`classify`], with ε multiplied by `decay` after
/// every episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGreedy {
    pub epsilon: f64,
    pub decay: f64,
}

impl Default for EpsilonGreedy {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            decay: 0.95,
        }
    }
}

impl EpsilonGreedy {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.epsilon) && (0.0..=1.0).contains(&self.decay) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid exploration schedule {self:?}")))
        }
    }

    /// Always consumes one uniform draw, plus one more when exploring.
    pub fn select<R: Rng + ?Sized>(&self, dist: &ClassDistribution, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        if u < self.epsilon {
            rng.random_range(0..dist.probs.len())
        } else {
            classify(dist)
        }
    }

    pub fn end_episode(&mut self) {
        self.epsilon *= self.decay;
    }
}
