//! Central finite-difference verification of [`learning::backward`].
//!
//! The numerical side only ever calls [`network::forward`]; it shares no code
//! with the analytic reverse pass.
//!
//! [`learning::backward`]: crate::learning::backward
//! [`network::forward`]: crate::network::forward

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::learning::backward;
use crate::network::{forward, init_params, NetworkParameters};
use crate::rng::{derive_seed, seeded};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub networks: usize,
    /// Upper bound on `[inputs, hidden, outputs]`; each is drawn from `1..=max`.
    pub max_sizes: [usize; 3],
    pub step: f64,
    pub rel_tol: f64,
    /// Denominator floor for the relative error of near-zero entries.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            networks: 100,
            max_sizes: [8, 16, 4],
            step: 1e-5,
            rel_tol: 1e-4,
            abs_floor: 1e-2,
            seed: 0x6772_6164,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryMismatch {
    pub network: usize,
    pub layer: usize,
    pub index: usize,
    pub is_bias: bool,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub networks: usize,
    pub entries: usize,
    pub max_rel_error: f64,
    pub failures: Vec<EntryMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn loss(params: &NetworkParameters, x: &[f64], action: usize, target: f64) -> Result<f64> {
    let z = forward(params, x)?.logits()[action];
    Ok(0.5 * (z - target) * (z - target))
}

fn param_mut(p: &mut NetworkParameters, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
    if is_bias {
        &mut p.layers[layer].bias[i]
    } else {
        &mut p.layers[layer].weights[i]
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Checks every parameter of one network at one sample.
pub fn check_network(
    params: &NetworkParameters,
    input: &[f64],
    action: usize,
    target: f64,
    config: &GradCheckConfig,
    network: usize,
    report: &mut GradCheckReport,
) -> Result<()> {
    let trace = forward(params, input)?;
    let grads = backward(params, &trace, action, target)?;
    let h = config.step;
    let mut probe = params.clone();
    for l in 0..params.layers.len() {
        for is_bias in [false, true] {
            let count = if is_bias {
                params.layers[l].bias.len()
            } else {
                params.layers[l].weights.len()
            };
            for i in 0..count {
                let original = *param_mut(&mut probe, l, is_bias, i);
                *param_mut(&mut probe, l, is_bias, i) = original + h;
                let up = loss(&probe, input, action, target)?;
                *param_mut(&mut probe, l, is_bias, i) = original - h;
                let down = loss(&probe, input, action, target)?;
                *param_mut(&mut probe, l, is_bias, i) = original;
                let numeric = (up - down) / (2.0 * h);
                let analytic = if is_bias {
                    grads.bias[l][i]
                } else {
                    grads.weights[l][i]
                };
                let rel = relative_error(analytic, numeric, config.abs_floor);
                report.entries += 1;
                report.max_rel_error = report.max_rel_error.max(rel);
                if !(rel <= config.rel_tol) {
                    report.failures.push(EntryMismatch {
                        network,
                        layer: l,
                        index: i,
                        is_bias,
                        analytic,
                        numeric,
                        rel_error: rel,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Random networks, inputs, actions and targets, all derived from `config.seed`.
pub fn run_suite(config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        networks: config.networks,
        entries: 0,
        max_rel_error: 0.0,
        failures: Vec::new(),
    };
    let mut rng = seeded(config.seed);
    for net in 0..config.networks {
        let sizes: Vec<usize> = config
            .max_sizes
            .iter()
            .map(|&m| rng.random_range(1..=m.max(1)))
            .collect();
        let mut params = init_params(&sizes, derive_seed(config.seed, net as u64))?;
        // non-zero biases so the check also exercises bias paths through ReLU
        for layer in &mut params.layers {
            for b in &mut layer.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random::<f64>()).collect();
        let action = rng.random_range(0..sizes[2]);
        let target = rng.random_range(-2.0..2.0);
        check_network(&params, &input, action, target, config, net, &mut report)?;
    }
    Ok(report)
}
