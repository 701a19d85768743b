use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, EpisodeMetrics};
use super::scenario::{ControllerVariant, ScenarioConfig, SetpointProfile};
use crate::controller::{
    apply_action, pd_torque, ActionContext, GainLimits, JointState, PDGains, Setpoint,
};
use crate::learning::{step_reward, train_policy_report, Transition};
use crate::network::{forward, init_params, softmax, NetworkParameters};
use crate::plant::{accumulate_energy, EnergyAccount, FaultEffects, Plant};
use crate::rng::{derive_seed, stream, stream_rng, SimRng};
use crate::sensing::{calibrate, normalize, sample_sensors, ChannelCalibration, SensorFrame};
use crate::{Error, Result};

/// State of one control tick, taken at the end of the tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// s
    pub time: f64,
    pub q: f64,
    pub q_dot: f64,
    /// Task reference position (before any action offset).
    pub q_d: f64,
    pub tau: f64,
    pub action: usize,
    pub reward: f64,
    /// Cumulative actuator input work (J).
    pub energy: f64,
    /// Cumulative useful output work (J).
    pub useful_work: f64,
    pub fault_active: bool,
}

impl TraceRecord {
    pub fn error(&self) -> f64 {
        self.q_d - self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub control_period: f64,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub trace: EpisodeTrace,
    pub metrics: EpisodeMetrics,
    pub calibration: ChannelCalibration,
    /// Final network for the adaptive variant, `None` for the baseline.
    pub params: Option<NetworkParameters>,
    pub training_updates: usize,
    pub final_gains: PDGains,
}

/// An episode that stopped early, with everything recorded up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFailure {
    pub time: f64,
    pub error: Error,
    pub partial: EpisodeTrace,
}

impl core::fmt::Display for EpisodeFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "episode failed at t={}s after {} ticks: {}",
            self.time,
            self.partial.records.len(),
            self.error
        )
    }
}

/// Disturbance-free calibration run: the joint is stepped to just above the
/// profile's highest level, then to just below its lowest, under the nominal
/// gains, and the frames seen along the way fix the min-max ranges.
pub fn warmup_calibration(config: &ScenarioConfig) -> Result<ChannelCalibration> {
    let s = &config.scenario;
    let frames = s.warmup_frames;
    let (lo, hi) = s.setpoint.range();
    let (lo, hi) = (lo - s.warmup_excursion, hi + s.warmup_excursion);
    let mut rng = stream_rng(s.seed, stream::WARMUP);
    let mut plant = Plant::new(
        config.plant.params(),
        config.plant.thermal,
        JointState {
            q: s.initial_position,
            q_dot: 0.0,
        },
    );
    let c = &config.controller;
    let period = config.control_period();
    let mut window: Vec<SensorFrame> = Vec::with_capacity(frames);
    for k in 0..frames {
        let target = if k < frames.div_ceil(2) { hi } else { lo };
        let sp = Setpoint {
            q_d: target,
            q_dot_d: 0.0,
        };
        let readout = plant.readout(target, &FaultEffects::NONE);
        let frame = sample_sensors(k as f64 * period, &plant.state, &readout, &s.sensor_noise, &mut rng)?;
        let cmd = pd_torque(&c.gains, &sp, &frame.measured_state(), c.tau_max)?;
        for _ in 0..c.decision_steps {
            plant.advance(cmd.tau, 0.0, &FaultEffects::NONE)?;
        }
        window.push(frame);
    }
    calibrate(&window)
}

/// Gains mapped onto `[0, 1]` on a log scale between their limits.
pub fn gain_features(gains: &PDGains, limits: &GainLimits) -> [f64; 2] {
    let scale = |v: f64, [lo, hi]: [f64; 2]| {
        if hi > lo && lo > 0.0 {
            (libm::log(v / lo) / libm::log(hi / lo)).clamp(0.0, 1.0)
        } else if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    [scale(gains.k_p, limits.k_p), scale(gains.k_d, limits.k_d)]
}

struct Learner {
    params: NetworkParameters,
    explore_rng: SimRng,
    exploration: crate::learning::EpsilonGreedy,
    training_seed: u64,
    rounds: u64,
    updates: usize,
    replay: usize,
    finished: Vec<Vec<Transition>>,
    current: Vec<Transition>,
}

impl Learner {
    fn close_cycle(&mut self) {
        if let Some(last) = self.current.last_mut() {
            last.terminal = true;
            last.next_features = last.features.clone();
        }
        if !self.current.is_empty() {
            self.finished.push(core::mem::take(&mut self.current));
        }
        if self.finished.len() > self.replay {
            let excess = self.finished.len() - self.replay;
            self.finished.drain(..excess);
        }
        self.exploration.end_episode();
    }

    fn train(&mut self, config: &ScenarioConfig) -> Result<()> {
        if self.finished.is_empty() {
            return Ok(());
        }
        let seed = derive_seed(self.training_seed, self.rounds);
        let report = train_policy_report(&self.params, &self.finished, &config.training_config(seed))?;
        self.params = report.params;
        self.updates += report.updates;
        self.rounds += 1;
        Ok(())
    }
}

/// Runs the full sense → normalize → decide → actuate → step → reward →
/// adapt loop for one scenario.
///
/// Same config and seed give the same trace bit for bit. Sensor noise,
/// disturbances and setpoints come from streams the controller cannot
/// influence, so both variants face identical environments.
pub fn run_episode(config: &ScenarioConfig) -> core::result::Result<EpisodeOutcome, EpisodeFailure> {
    let mut records = Vec::with_capacity(config.total_ticks());
    let mut time = 0.0;
    match episode_loop(config, &mut records, &mut time) {
        Ok((calibration, learner, final_gains)) => {
            let trace = EpisodeTrace {
                seed: config.scenario.seed,
                control_period: config.control_period(),
                records,
            };
            let metrics = compute_metrics(&trace, config).map_err(|error| EpisodeFailure {
                time,
                error,
                partial: trace.clone(),
            })?;
            let (params, training_updates) = match learner {
                Some(l) => (Some(l.params), l.updates),
                None => (None, 0),
            };
            Ok(EpisodeOutcome {
                trace,
                metrics,
                calibration,
                params,
                training_updates,
                final_gains,
            })
        }
        Err(error) => Err(EpisodeFailure {
            time,
            error,
            partial: EpisodeTrace {
                seed: config.scenario.seed,
                control_period: config.control_period(),
                records,
            },
        }),
    }
}

fn episode_loop(
    config: &ScenarioConfig,
    records: &mut Vec<TraceRecord>,
    time: &mut f64,
) -> Result<(ChannelCalibration, Option<Learner>, PDGains)> {
    config.validate()?;
    let s = &config.scenario;
    let c = &config.controller;
    let seed = s.seed;
    let calibration = warmup_calibration(config)?;

    let mut sensor_rng = stream_rng(seed, stream::SENSOR_NOISE);
    let mut disturbance_rng = stream_rng(seed, stream::DISTURBANCE);
    let mut setpoint_rng = stream_rng(seed, stream::SETPOINT);

    let mut learner = match s.variant {
        ControllerVariant::FixedBaseline => None,
        ControllerVariant::Adaptive => Some(Learner {
            params: init_params(&config.layer_sizes(), derive_seed(seed, stream::NETWORK_INIT))?,
            explore_rng: stream_rng(seed, stream::EXPLORATION),
            exploration: config.training.exploration,
            training_seed: derive_seed(seed, stream::TRAINING),
            rounds: 0,
            updates: 0,
            replay: config.training.replay_cycles,
            finished: Vec::new(),
            current: Vec::new(),
        }),
    };

    let mut plant = Plant::new(
        config.plant.params(),
        config.plant.thermal,
        JointState {
            q: s.initial_position,
            q_dot: 0.0,
        },
    );
    let dt = config.plant.dt;
    let period = config.control_period();
    let ticks = config.total_ticks();
    let per_cycle = config.ticks_per_cycle();
    let band = s.success.band;
    let nominal_kp = c.gains.k_p;

    let mut gains = c.gains;
    let mut offset = 0.0;
    let mut acct = EnergyAccount::default();
    let mut cycle_bias = 0.0;
    let mut level = s.initial_position;

    for k in 0..ticks {
        let t = k as f64 * period;
        *time = t;
        if k % per_cycle == 0 {
            let cycle = k / per_cycle;
            if let Some(l) = learner.as_mut() {
                if cycle > 0 {
                    l.close_cycle();
                    if cycle % config.training.train_every == 0 {
                        l.train(config)?;
                    }
                }
            }
            cycle_bias = if s.disturbance.cycle_bias > 0.0 {
                disturbance_rng.random_range(-s.disturbance.cycle_bias..=s.disturbance.cycle_bias)
            } else {
                0.0
            };
            level = match &s.setpoint {
                SetpointProfile::Constant { position } => *position,
                SetpointProfile::Steps { levels } => levels[cycle % levels.len()],
                SetpointProfile::RandomSteps { min, max } => {
                    if min < max {
                        setpoint_rng.random_range(*min..=*max)
                    } else {
                        *min
                    }
                }
                SetpointProfile::Sine { center, .. } => *center,
            };
        }

        let reference = s.setpoint.reference(t, level);
        let faults_now = FaultEffects::at(&config.faults, t);
        let commanded = reference.q_d + offset;
        let readout = plant.readout(commanded, &faults_now);
        let frame = sample_sensors(t, &plant.state, &readout, &s.sensor_noise, &mut sensor_rng)?;
        let mut features = normalize(&frame, &calibration)?.values;
        if config.network.gain_features {
            features.extend(gain_features(&gains, &c.actions.limits));
        }

        let action = match learner.as_mut() {
            Some(l) => {
                let fwd = forward(&l.params, &features)?;
                let dist = softmax(fwd.logits())?;
                let action = l.exploration.select(&dist, &mut l.explore_rng);
                let home = ActionContext {
                    nominal: c.gains,
                    reference,
                };
                let current = Setpoint {
                    q_d: commanded,
                    q_dot_d: reference.q_dot_d,
                };
                let (g, sp) = apply_action(action, &c.actions, gains, current, &home)?;
                gains = g;
                offset = sp.q_d - reference.q_d;
                if let Some(prev) = l.current.last_mut() {
                    prev.next_features = features.clone();
                }
                action
            }
            None => 0,
        };

        let target = Setpoint {
            q_d: reference.q_d + offset,
            q_dot_d: reference.q_dot_d,
        };
        let cmd = pd_torque(&gains, &target, &frame.measured_state(), c.tau_max)?;
        let torque_noise: f64 = if s.disturbance.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut disturbance_rng);
            s.disturbance.noise_std * z
        } else {
            0.0
        };

        let work_before = acct.input_work;
        for step in 0..c.decision_steps {
            let ts = t + step as f64 * dt;
            let fx = FaultEffects::at(&config.faults, ts);
            let external = s.disturbance.torque(ts, cycle_bias, torque_noise);
            let e_before = reference.q_d - plant.state.q;
            plant.advance(cmd.tau, external, &fx)?;
            let e_after = reference.q_d - plant.state.q;
            let useful = 0.5 * nominal_kp * (e_before * e_before - e_after * e_after);
            acct = accumulate_energy(&acct, cmd.tau, plant.state.q_dot, useful, dt)?;
        }

        let error = reference.q_d - plant.state.q;
        let unrecovered = faults_now.any_active && error.abs() > band;
        let reward = step_reward(
            error,
            acct.input_work - work_before,
            unrecovered,
            &config.training.reward,
        );
        if let Some(l) = learner.as_mut() {
            l.current.push(Transition {
                features,
                action,
                reward,
                next_features: Vec::new(),
                terminal: false,
            });
        }
        if !reward.is_finite() {
            return Err(Error::Numeric(format!("reward at t={t}")));
        }
        records.push(TraceRecord {
            time: (k + 1) as f64 * period,
            q: plant.state.q,
            q_dot: plant.state.q_dot,
            q_d: reference.q_d,
            tau: cmd.tau,
            action,
            reward,
            energy: acct.input_work,
            useful_work: acct.output_work,
            fault_active: faults_now.any_active,
        });
    }
    if let Some(l) = learner.as_mut() {
        l.close_cycle();
    }
    Ok((calibration, learner, gains))
}
