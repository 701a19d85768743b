use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeTrace};
use super::metrics::EpisodeMetrics;
use super::scenario::{ControllerVariant, ScenarioConfig};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub metrics: Option<EpisodeMetrics>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub seed: u64,
    pub baseline: ArmOutcome,
    pub adaptive: ArmOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample variance across replicates (0 for a single replicate).
    pub variance: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self { mean, variance, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub baseline: Option<Stats>,
    pub adaptive: Option<Stats>,
    /// adaptive mean − baseline mean
    pub difference: Option<f64>,
    /// adaptive mean / baseline mean; absent when the baseline mean is 0
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<MetricSummary>,
    pub failures: Vec<String>,
}

impl ComparisonReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|m| m.metric == name)
    }
}

/// Names of the summarized metrics, in report order.
pub const METRICS: [&str; 5] = [
    "success_rate",
    "mean_fault_response",
    "positional_error_variance",
    "energy_per_task",
    "efficiency",
];

fn metric_value(m: &EpisodeMetrics, name: &str) -> Option<f64> {
    match name {
        "success_rate" => Some(m.success_rate),
        "mean_fault_response" => m.mean_fault_response,
        "positional_error_variance" => Some(m.positional_error_variance),
        "energy_per_task" => Some(m.energy_per_task),
        "efficiency" => m.efficiency,
        _ => None,
    }
}

/// Per-replicate seeds derived from a master seed.
pub fn replicate_seeds(master: u64, replicates: usize) -> Vec<u64> {
    (0..replicates as u64)
        .map(|i| derive_seed(derive_seed(master, stream::REPLICATE), i))
        .collect()
}

/// One arm of one replicate, keeping the trace when it ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRun {
    pub outcome: ArmOutcome,
    pub trace: Option<EpisodeTrace>,
}

pub fn run_arm(config: &ScenarioConfig, seed: u64) -> ArmRun {
    match run_episode(&config.with_seed(seed)) {
        Ok(out) => ArmRun {
            outcome: ArmOutcome {
                metrics: Some(out.metrics),
                failure: None,
            },
            trace: Some(out.trace),
        },
        Err(f) => ArmRun {
            outcome: ArmOutcome {
                metrics: None,
                failure: Some(f.to_string()),
            },
            trace: None,
        },
    }
}

impl ComparisonReport {
    /// Builds the report from finished `(baseline, adaptive)` runs, one pair
    /// per seed, in seed order.
    pub fn assemble(master_seed: u64, seeds: &[u64], runs: Vec<(ArmOutcome, ArmOutcome)>) -> Self {
        let mut failures = Vec::new();
        let replicates: Vec<ReplicateResult> = seeds
            .iter()
            .zip(runs)
            .map(|(&seed, (baseline, adaptive))| {
                for (arm, o) in [("baseline", &baseline), ("adaptive", &adaptive)] {
                    if let Some(f) = &o.failure {
                        failures.push(format!("seed {seed} {arm}: {f}"));
                    }
                }
                ReplicateResult {
                    seed,
                    baseline,
                    adaptive,
                }
            })
            .collect();
        let summary = METRICS
            .iter()
            .map(|&name| {
                let collect = |pick: fn(&ReplicateResult) -> &ArmOutcome| {
                    replicates
                        .iter()
                        .filter_map(|r| pick(r).metrics.as_ref().and_then(|m| metric_value(m, name)))
                        .collect::<Vec<f64>>()
                };
                let baseline = Stats::of(&collect(|r| &r.baseline));
                let adaptive = Stats::of(&collect(|r| &r.adaptive));
                let (difference, ratio) = match (baseline, adaptive) {
                    (Some(b), Some(a)) => (
                        Some(a.mean - b.mean),
                        if b.mean != 0.0 { Some(a.mean / b.mean) } else { None },
                    ),
                    _ => (None, None),
                };
                MetricSummary {
                    metric: name.into(),
                    baseline,
                    adaptive,
                    difference,
                    ratio,
                }
            })
            .collect();
        Self {
            master_seed,
            seeds: seeds.to_vec(),
            replicates,
            summary,
            failures,
        }
    }
}

/// A report plus, when requested, every trace as `(seed, arm, trace)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub traces: Vec<(u64, &'static str, EpisodeTrace)>,
}

/// Runs `baseline` and `candidate` on the same seeds. Every seed fixes the
/// sensor noise, disturbances, setpoints and faults for both arms.
pub fn compare_arms(
    baseline: &ScenarioConfig,
    candidate: &ScenarioConfig,
    master_seed: u64,
    seeds: &[u64],
    keep_traces: bool,
) -> Comparison {
    let mut traces = Vec::new();
    let runs = seeds
        .iter()
        .map(|&seed| {
            let b = run_arm(baseline, seed);
            let a = run_arm(candidate, seed);
            if keep_traces {
                for (arm, run) in [("fixed-baseline", &b), ("adaptive", &a)] {
                    if let Some(t) = &run.trace {
                        traces.push((seed, arm, t.clone()));
                    }
                }
            }
            (b.outcome, a.outcome)
        })
        .collect();
    Comparison {
        report: ComparisonReport::assemble(master_seed, seeds, runs),
        traces,
    }
}

/// Fixed-baseline versus adaptive on `replicates` seeds derived from the
/// config's master seed.
pub fn run_comparison(config: &ScenarioConfig, replicates: usize) -> ComparisonReport {
    let master = config.scenario.seed;
    let seeds = replicate_seeds(master, replicates);
    compare_arms(
        &config.with_variant(ControllerVariant::FixedBaseline),
        &config.with_variant(ControllerVariant::Adaptive),
        master,
        &seeds,
        false,
    )
    .report
}
