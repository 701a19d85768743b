use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::episode::EpisodeTrace;
use super::scenario::ScenarioConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultResponse {
    pub onset: f64,
    /// Seconds from onset to sustained re-entry into the success band. For a
    /// fault that never recovers this is the time left in the trace.
    pub response_time: f64,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success_rate: f64,
    pub cycle_success: Vec<bool>,
    pub fault_responses: Vec<FaultResponse>,
    /// Absent when no faults were scheduled.
    pub mean_fault_response: Option<f64>,
    /// Population variance of `q_d − q` over the whole trace (rad²).
    pub positional_error_variance: f64,
    /// Input work per cycle (J).
    pub energy_per_task: f64,
    /// Absent when the actuator did no work.
    pub efficiency: Option<f64>,
}

/// Two-pass population variance.
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Derives every episode metric from the trace and the config alone.
///
/// A cycle succeeds when `|q − q_d|` stays below the band for the whole tail
/// of the cycle. A fault's response time runs from its onset to the first
/// tick that starts a sustained in-band stretch.
pub fn compute_metrics(trace: &EpisodeTrace, config: &ScenarioConfig) -> Result<EpisodeMetrics> {
    let records = &trace.records;
    if records.is_empty() {
        return Err(Error::Metrics("trace is empty".into()));
    }
    let expected = config.total_ticks();
    if records.len() != expected {
        return Err(Error::Metrics(format!(
            "trace has {} ticks, config implies {expected}",
            records.len()
        )));
    }
    let period = config.control_period();
    if (trace.control_period - period).abs() > 1e-12 {
        return Err(Error::Metrics(format!(
            "trace control period {} differs from config {period}",
            trace.control_period
        )));
    }

    let crit = &config.scenario.success;
    let errors: Vec<f64> = records.iter().map(|r| r.error()).collect();
    let in_band: Vec<bool> = errors.iter().map(|e| e.abs() < crit.band).collect();

    let per_cycle = config.ticks_per_cycle();
    let tail = (libm::ceil(per_cycle as f64 * crit.tail_fraction - 1e-9) as usize).clamp(1, per_cycle);
    let cycle_success: Vec<bool> = in_band
        .chunks_exact(per_cycle)
        .map(|cycle| cycle[per_cycle - tail..].iter().all(|&ok| ok))
        .collect();
    let success_rate =
        cycle_success.iter().filter(|&&ok| ok).count() as f64 / cycle_success.len() as f64;

    let sustain = libm::round(crit.sustain / period) as usize;
    let end_time = records.last().unwrap().time;
    let fault_responses: Vec<FaultResponse> = config
        .faults
        .iter()
        .map(|f| {
            let start = records.partition_point(|r| r.time < f.onset);
            let mut run = 0usize;
            let mut found = None;
            for i in start..records.len() {
                run = if in_band[i] { run + 1 } else { 0 };
                if run >= sustain.max(1) {
                    found = Some(i + 1 - run);
                    break;
                }
            }
            match found {
                Some(i) => FaultResponse {
                    onset: f.onset,
                    response_time: (records[i].time - f.onset).max(0.0),
                    recovered: true,
                },
                None => FaultResponse {
                    onset: f.onset,
                    response_time: (end_time - f.onset).max(0.0),
                    recovered: false,
                },
            }
        })
        .collect();
    let mean_fault_response = if fault_responses.is_empty() {
        None
    } else {
        Some(
            fault_responses.iter().map(|f| f.response_time).sum::<f64>()
                / fault_responses.len() as f64,
        )
    };

    let last = records.last().unwrap();
    let efficiency = if last.energy > 0.0 {
        Some((last.useful_work * 100.0 / last.energy).clamp(0.0, 100.0))
    } else {
        None
    };

    Ok(EpisodeMetrics {
        success_rate,
        cycle_success,
        fault_responses,
        mean_fault_response,
        positional_error_variance: population_variance(&errors),
        energy_per_task: last.energy / config.scenario.cycles as f64,
        efficiency,
    })
}
