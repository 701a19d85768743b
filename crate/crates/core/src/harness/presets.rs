//! Built-in scenarios. The shipped scenario files mirror these.

use alloc::vec;
use alloc::vec::Vec;

use super::scenario::{
    ControllerSection, ControllerVariant, DisturbanceSpec, NetworkSection, PlantSection,
    ScenarioConfig, ScenarioKind, ScenarioSection, SetpointProfile, SuccessCriteria,
    TrainingSection,
};
use crate::learning::RewardWeights;
use crate::plant::{FaultEvent, FaultKind};
use crate::sensing::SensorNoise;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPLICATES: usize = 5;
pub const DEFAULT_CYCLES: usize = 20;

fn base(kind: ScenarioKind, duration: f64, setpoint: SetpointProfile, disturbance: DisturbanceSpec) -> ScenarioConfig {
    ScenarioConfig {
        scenario: ScenarioSection {
            kind,
            duration,
            cycles: DEFAULT_CYCLES,
            setpoint,
            disturbance,
            variant: ControllerVariant::Adaptive,
            seed: DEFAULT_SEED,
            initial_position: 0.0,
            sensor_noise: SensorNoise::default(),
            warmup_frames: 200,
            warmup_excursion: 0.1,
            success: SuccessCriteria::default(),
        },
        plant: PlantSection::default(),
        network: NetworkSection::default(),
        training: TrainingSection {
            gamma: 0.99,
            reward: RewardWeights {
                energy: 30.0,
                ..RewardWeights::default()
            },
            ..TrainingSection::default()
        },
        controller: ControllerSection::default(),
        faults: Vec::new(),
    }
}

/// Small random moves under a load sway near the nominal loop's resonance.
pub fn tracking() -> ScenarioConfig {
    base(
        ScenarioKind::Tracking,
        60.0,
        SetpointProfile::RandomSteps { min: -0.1, max: 0.1 },
        DisturbanceSpec {
            cycle_bias: 0.0,
            sine_amplitude: 1.0,
            sine_frequency: 0.71,
            noise_std: 0.0,
        },
    )
}

/// Random moves under a per-cycle load that fixed gains cannot hold in band.
pub fn disturbance_heavy() -> ScenarioConfig {
    base(
        ScenarioKind::Tracking,
        60.0,
        SetpointProfile::RandomSteps { min: -0.1, max: 0.1 },
        DisturbanceSpec {
            cycle_bias: 1.0,
            sine_amplitude: 0.0,
            sine_frequency: 0.0,
            noise_std: 0.2,
        },
    )
}

/// Ten bias-torque faults over a 600 s hold.
pub fn fault_recovery() -> ScenarioConfig {
    let mut c = base(
        ScenarioKind::FaultRecovery,
        600.0,
        SetpointProfile::Constant { position: 0.0 },
        DisturbanceSpec::default(),
    );
    c.faults = (0..10)
        .map(|i| FaultEvent {
            onset: 30.0 + 60.0 * i as f64,
            duration: 20.0,
            kind: FaultKind::BiasTorque,
            magnitude: if i % 2 == 0 { 1.0 } else { -1.0 },
        })
        .collect();
    // 30 s cycles; a short replay window keeps training rounds cheap.
    c.training.replay_cycles = 3;
    c
}

/// Constant hold under sinusoidal vibration.
pub fn vibration() -> ScenarioConfig {
    base(
        ScenarioKind::Vibration,
        60.0,
        SetpointProfile::Constant { position: 0.0 },
        DisturbanceSpec {
            cycle_bias: 0.0,
            sine_amplitude: 0.5,
            sine_frequency: 0.3,
            noise_std: 0.0,
        },
    )
}

/// Every preset by name.
pub fn all() -> Vec<(&'static str, ScenarioConfig)> {
    vec![
        ("tracking", tracking()),
        ("disturbance-heavy", disturbance_heavy()),
        ("fault-recovery", fault_recovery()),
        ("vibration", vibration()),
    ]
}

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for (name, c) in all() {
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
