use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::controller::{ActionTable, PDGains, Setpoint};
use crate::learning::{EpsilonGreedy, RewardWeights, TrainingConfig};
use crate::plant::{FaultEvent, PlantParameters, ThermalParameters};
use crate::sensing::{SensorNoise, CHANNELS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Tracking,
    FaultRecovery,
    Vibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerVariant {
    /// Constant nominal PD gains; no decision network and no learning.
    FixedBaseline,
    /// Network-selected actions with online training between cycles.
    Adaptive,
}

/// Task reference over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetpointProfile {
    Constant { position: f64 },
    /// Cycle `i` targets `levels[i % levels.len()]`.
    Steps { levels: Vec<f64> },
    /// Each cycle targets a level drawn uniformly from `[min, max]`.
    RandomSteps { min: f64, max: f64 },
    Sine { center: f64, amplitude: f64, period: f64 },
}

impl SetpointProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Constant { position } => position.is_finite(),
            Self::Steps { levels } => !levels.is_empty() && levels.iter().all(|l| l.is_finite()),
            Self::RandomSteps { min, max } => min.is_finite() && max.is_finite() && min <= max,
            Self::Sine {
                center,
                amplitude,
                period,
            } => center.is_finite() && amplitude.is_finite() && *period > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid setpoint profile {self:?}")))
        }
    }

    /// Smallest and largest position the profile can command.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::Constant { position } => (*position, *position),
            Self::Steps { levels } => (
                levels.iter().cloned().fold(f64::INFINITY, f64::min),
                levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
            Self::RandomSteps { min, max } => (*min, *max),
            Self::Sine {
                center, amplitude, ..
            } => (center - amplitude.abs(), center + amplitude.abs()),
        }
    }

    /// Reference at time `t` inside a cycle whose step level is `level`.
    pub fn reference(&self, t: f64, level: f64) -> Setpoint {
        match self {
            Self::Sine {
                center,
                amplitude,
                period,
            } => {
                let w = 2.0 * core::f64::consts::PI / period;
                Setpoint {
                    q_d: center + amplitude * libm::sin(w * t),
                    q_dot_d: amplitude * w * libm::cos(w * t),
                }
            }
            _ => Setpoint {
                q_d: level,
                q_dot_d: 0.0,
            },
        }
    }
}

/// Environmental torque acting on the joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSpec {
    /// Each cycle adds a constant load drawn uniformly from `±cycle_bias` (N·m).
    pub cycle_bias: f64,
    /// Sinusoidal vibration amplitude (N·m).
    pub sine_amplitude: f64,
    /// Hz
    pub sine_frequency: f64,
    /// White torque noise redrawn every control tick (N·m).
    pub noise_std: f64,
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        let v = [self.cycle_bias, self.sine_amplitude, self.sine_frequency, self.noise_std];
        if v.iter().all(|x| x.is_finite() && *x >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid disturbance spec {self:?}")))
        }
    }

    pub fn torque(&self, t: f64, bias: f64, noise: f64) -> f64 {
        bias + self.sine_amplitude * libm::sin(2.0 * core::f64::consts::PI * self.sine_frequency * t)
            + noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessCriteria {
    /// |q − q_d| tolerance (rad).
    pub band: f64,
    /// Fraction of each cycle, at its end, that must stay inside the band.
    pub tail_fraction: f64,
    /// How long the error must stay in band to count a fault as handled (s).
    pub sustain: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self {
            band: 0.02,
            tail_fraction: 0.2,
            sustain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    /// s
    pub duration: f64,
    pub cycles: usize,
    pub setpoint: SetpointProfile,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    pub variant: ControllerVariant,
    pub seed: u64,
    #[serde(default)]
    pub initial_position: f64,
    #[serde(default)]
    pub sensor_noise: SensorNoise,
    /// Frames in the disturbance-free calibration run.
    #[serde(default = "default_warmup_frames")]
    pub warmup_frames: usize,
    /// Extra travel beyond the profile's range during calibration (rad).
    #[serde(default = "default_warmup_excursion")]
    pub warmup_excursion: f64,
    #[serde(default)]
    pub success: SuccessCriteria,
}

fn default_warmup_frames() -> usize {
    200
}

fn default_warmup_excursion() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub inertia: f64,
    pub friction: f64,
    pub dt: f64,
    pub thermal: ThermalParameters,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = PlantParameters::default();
        Self {
            inertia: p.inertia,
            friction: p.friction,
            dt: p.dt,
            thermal: ThermalParameters::default(),
        }
    }
}

impl PlantSection {
    pub fn params(&self) -> PlantParameters {
        PlantParameters {
            inertia: self.inertia,
            friction: self.friction,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub hidden: Vec<usize>,
    /// Append the current gains, log-scaled into their limits, to the
    /// sensor features.
    pub gain_features: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            gain_features: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub gamma: f64,
    pub alpha: f64,
    pub epochs: usize,
    /// Train after every `train_every` cycles.
    pub train_every: usize,
    /// Completed cycles kept for training; older ones are dropped.
    pub replay_cycles: usize,
    pub exploration: EpsilonGreedy,
    pub reward: RewardWeights,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            gamma: t.gamma,
            alpha: t.alpha,
            epochs: t.epochs,
            train_every: 1,
            replay_cycles: 20,
            exploration: EpsilonGreedy::default(),
            reward: RewardWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    /// Nominal gains: the baseline's fixed gains and the adaptive start point.
    pub gains: PDGains,
    /// N·m
    pub tau_max: f64,
    /// Physics steps per control decision.
    pub decision_steps: usize,
    pub actions: ActionTable,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            gains: PDGains { k_p: 20.0, k_d: 3.0 },
            tau_max: 10.0,
            decision_steps: 10,
            actions: ActionTable::default(),
        }
    }
}

/// Everything one episode needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub faults: Vec<FaultEvent>,
}

impl ScenarioConfig {
    pub fn control_period(&self) -> f64 {
        self.plant.dt * self.controller.decision_steps as f64
    }

    pub fn total_ticks(&self) -> usize {
        libm::round(self.scenario.duration / self.control_period()) as usize
    }

    pub fn ticks_per_cycle(&self) -> usize {
        self.total_ticks() / self.scenario.cycles.max(1)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.feature_count()];
        sizes.extend(&self.network.hidden);
        sizes.push(self.controller.actions.len());
        sizes
    }

    /// Width of the decision network's input.
    pub fn feature_count(&self) -> usize {
        if self.network.gain_features {
            CHANNELS + 2
        } else {
            CHANNELS
        }
    }

    pub fn training_config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            gamma: self.training.gamma,
            alpha: self.training.alpha,
            epochs: self.training.epochs,
            seed,
        }
    }

    pub fn with_variant(&self, variant: ControllerVariant) -> Self {
        let mut c = self.clone();
        c.scenario.variant = variant;
        c
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.scenario.seed = seed;
        c
    }

    /// Checks every section. Messages name the offending field as
    /// `section.field` so file loaders can point at it.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let field = |name: &str, e: Error| match e {
            Error::Config(m) => Error::Config(format!("{name}: {m}")),
            other => other,
        };
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(Error::Config(format!("scenario.duration: must be > 0, got {}", s.duration)));
        }
        if s.cycles == 0 {
            return Err(Error::Config("scenario.cycles: must be >= 1".into()));
        }
        s.setpoint.validate().map_err(|e| field("scenario.setpoint", e))?;
        s.disturbance.validate().map_err(|e| field("scenario.disturbance", e))?;
        s.sensor_noise.validate().map_err(|e| field("scenario.sensor_noise", e))?;
        if !s.initial_position.is_finite() {
            return Err(Error::Config("scenario.initial_position: must be finite".into()));
        }
        if s.warmup_frames == 0 {
            return Err(Error::Config("scenario.warmup_frames: must be >= 1".into()));
        }
        if !(s.warmup_excursion >= 0.0 && s.warmup_excursion.is_finite()) {
            return Err(Error::Config("scenario.warmup_excursion: must be >= 0".into()));
        }
        let sc = &s.success;
        if !(sc.band > 0.0 && sc.tail_fraction > 0.0 && sc.tail_fraction <= 1.0 && sc.sustain >= 0.0) {
            return Err(Error::Config(format!("scenario.success: invalid criteria {sc:?}")));
        }
        if s.kind == ScenarioKind::FaultRecovery && self.faults.is_empty() {
            return Err(Error::Config(
                "faults: a fault-recovery scenario needs at least one fault".into(),
            ));
        }

        self.plant.params().validate().map_err(|e| field("plant", e))?;
        let th = &self.plant.thermal;
        if ![th.ambient, th.heating, th.cooling].iter().all(|v| v.is_finite())
            || th.heating < 0.0
            || th.cooling < 0.0
        {
            return Err(Error::Config(format!("plant.thermal: invalid parameters {th:?}")));
        }

        if self.network.hidden.contains(&0) {
            return Err(Error::Config("network.hidden: zero-width layer".into()));
        }

        let t = &self.training;
        self.training_config(0).validate().map_err(|e| field("training", e))?;
        if t.train_every == 0 {
            return Err(Error::Config("training.train_every: must be >= 1".into()));
        }
        if t.replay_cycles == 0 {
            return Err(Error::Config("training.replay_cycles: must be >= 1".into()));
        }
        t.exploration.validate().map_err(|e| field("training.exploration", e))?;
        t.reward.validate().map_err(|e| field("training.reward", e))?;

        let c = &self.controller;
        c.gains.validate().map_err(|e| field("controller.gains", e))?;
        if !(c.tau_max > 0.0 && c.tau_max.is_finite()) {
            return Err(Error::Config(format!("controller.tau_max: must be > 0, got {}", c.tau_max)));
        }
        if c.decision_steps == 0 {
            return Err(Error::Config("controller.decision_steps: must be >= 1".into()));
        }
        c.actions.validate().map_err(|e| field("controller.actions", e))?;

        for (i, f) in self.faults.iter().enumerate() {
            f.validate().map_err(|e| field(&format!("faults[{i}]"), e))?;
        }

        let ticks = s.duration / self.control_period();
        if (ticks - libm::round(ticks)).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "scenario.duration: {} s is not a whole number of {} s control periods",
                s.duration,
                self.control_period()
            )));
        }
        let ticks = self.total_ticks();
        if ticks % s.cycles != 0 {
            return Err(Error::Config(format!(
                "scenario.cycles: {ticks} control ticks do not split evenly into {} cycles",
                s.cycles
            )));
        }
        Ok(())
    }
}
