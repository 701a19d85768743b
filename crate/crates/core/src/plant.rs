//! Single rigid joint driven by an actuator, with scripted faults and energy
//! bookkeeping.
//!
//! Dynamics: `I·q̈ = τ + τ_fault − s·b·q̇`, where `s` is the friction scale a
//! fault may raise, integrated with semi-implicit Euler (velocity first, then
//! position with the new velocity).

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::controller::JointState;
use crate::sensing::PlantReadout;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParameters {
    /// kg·m²
    pub inertia: f64,
    /// Viscous friction, N·m·s/rad.
    pub friction: f64,
    /// Physics step, s.
    pub dt: f64,
}

impl Default for PlantParameters {
    fn default() -> Self {
        Self {
            inertia: 1.0,
            friction: 0.1,
            dt: 1e-3,
        }
    }
}

impl PlantParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0 && self.inertia.is_finite()) {
            return Err(Error::Config(format!("inertia must be > 0, got {}", self.inertia)));
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(Error::Config(format!("friction must be >= 0, got {}", self.friction)));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::Config(format!("dt must be in (0, 0.01], got {}", self.dt)));
        }
        Ok(())
    }
}

/// First-order winding temperature model driven by copper losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalParameters {
    /// °C
    pub ambient: f64,
    /// °C/s per (N·m)² of actuator torque.
    pub heating: f64,
    /// 1/s
    pub cooling: f64,
}

impl Default for ThermalParameters {
    fn default() -> Self {
        Self {
            ambient: 25.0,
            heating: 0.01,
            cooling: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Constant extra torque on the joint (N·m).
    BiasTorque,
    /// Constant offset on the position encoder (rad).
    SensorOffset,
    /// Temperature ramp (°C/s) plus 50% more friction.
    OverheatDrift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub onset: f64,
    pub duration: f64,
    pub kind: FaultKind,
    pub magnitude: f64,
}

impl FaultEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.onset >= 0.0 && self.onset.is_finite())
            || !(self.duration > 0.0 && self.duration.is_finite())
            || !self.magnitude.is_finite()
        {
            return Err(Error::Config(format!("invalid fault event {self:?}")));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.onset <= t && t < self.end()
    }
}

pub const OVERHEAT_FRICTION_SCALE: f64 = 1.5;

/// Combined effect of every fault active at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEffects {
    pub bias_torque: f64,
    pub position_offset: f64,
    pub friction_scale: f64,
    pub temperature_rise: f64,
    pub any_active: bool,
}

impl Default for FaultEffects {
    fn default() -> Self {
        Self::NONE
    }
}

impl FaultEffects {
    pub const NONE: Self = Self {
        bias_torque: 0.0,
        position_offset: 0.0,
        friction_scale: 1.0,
        temperature_rise: 0.0,
        any_active: false,
    };

    pub fn at(faults: &[FaultEvent], t: f64) -> Self {
        let mut fx = Self::NONE;
        for f in faults.iter().filter(|f| f.is_active(t)) {
            fx.any_active = true;
            match f.kind {
                FaultKind::BiasTorque => fx.bias_torque += f.magnitude,
                FaultKind::SensorOffset => fx.position_offset += f.magnitude,
                FaultKind::OverheatDrift => {
                    fx.friction_scale = OVERHEAT_FRICTION_SCALE;
                    fx.temperature_rise += f.magnitude * (t - f.onset);
                }
            }
        }
        fx
    }
}

/// One semi-implicit Euler step under net external torque `tau`.
pub fn step(
    params: &PlantParameters,
    state: &JointState,
    tau: f64,
    faults: &FaultEffects,
) -> Result<JointState> {
    let q_ddot = acceleration(params, state, tau, faults);
    let q_dot = state.q_dot + params.dt * q_ddot;
    let q = state.q + params.dt * q_dot;
    let next = JointState { q, q_dot };
    if !next.is_finite() {
        return Err(Error::Divergence(format!(
            "joint state {next:?} after applying tau={tau} to {state:?}"
        )));
    }
    Ok(next)
}

fn acceleration(params: &PlantParameters, state: &JointState, tau: f64, faults: &FaultEffects) -> f64 {
    let friction = faults.friction_scale * params.friction * state.q_dot;
    (tau + faults.bias_torque - friction) / params.inertia
}

/// Plant instance owned by one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub params: PlantParameters,
    pub thermal: ThermalParameters,
    pub state: JointState,
    /// Winding temperature without fault drift (°C).
    pub temperature: f64,
    pub last_acceleration: f64,
    pub last_torque: f64,
}

impl Plant {
    pub fn new(params: PlantParameters, thermal: ThermalParameters, state: JointState) -> Self {
        Self {
            params,
            thermal,
            state,
            temperature: thermal.ambient,
            last_acceleration: 0.0,
            last_torque: 0.0,
        }
    }

    /// Advances one physics step. `actuator` is the motor torque, `external`
    /// any environmental disturbance torque.
    pub fn advance(&mut self, actuator: f64, external: f64, faults: &FaultEffects) -> Result<()> {
        let before = self.state.q_dot;
        self.state = step(&self.params, &self.state, actuator + external, faults)?;
        let dt = self.params.dt;
        self.last_acceleration = (self.state.q_dot - before) / dt;
        self.last_torque = actuator;
        let th = &self.thermal;
        self.temperature +=
            dt * (th.heating * actuator * actuator - th.cooling * (self.temperature - th.ambient));
        Ok(())
    }

    pub fn readout(&self, commanded_position: f64, faults: &FaultEffects) -> PlantReadout {
        PlantReadout {
            torque: self.last_torque,
            temperature: self.temperature + faults.temperature_rise,
            vibration: self.last_acceleration.abs(),
            commanded_position,
            position_offset: faults.position_offset,
        }
    }
}

/// Running work totals for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyAccount {
    /// Consumed actuator work, ∫|τ·q̇| dt (J).
    pub input_work: f64,
    /// Work that reduced the tracking-error potential (J).
    pub output_work: f64,
    /// s
    pub elapsed: f64,
    /// |τ·q̇| at the previous sample, for the trapezoid rule.
    pub last_power: Option<f64>,
}

/// Adds one step of length `dt` to the account.
///
/// Input work uses the trapezoid rule on `|τ·q̇|` (the first sample is held
/// constant). `useful` is the drop in tracking-error potential over the step;
/// it is clipped to `[0, input increment]` so output never exceeds input.
pub fn accumulate_energy(
    acct: &EnergyAccount,
    tau: f64,
    q_dot: f64,
    useful: f64,
    dt: f64,
) -> Result<EnergyAccount> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("energy step dt must be > 0, got {dt}")));
    }
    let power = (tau * q_dot).abs();
    if !power.is_finite() || useful.is_nan() {
        return Err(Error::Numeric(format!(
            "energy integrand tau={tau} q_dot={q_dot} useful={useful}"
        )));
    }
    let input = 0.5 * (acct.last_power.unwrap_or(power) + power) * dt;
    let output = useful.clamp(0.0, input);
    Ok(EnergyAccount {
        input_work: acct.input_work + input,
        output_work: acct.output_work + output,
        elapsed: acct.elapsed + dt,
        last_power: Some(power),
    })
}

/// η = W_out / W_in × 100.
pub fn efficiency(acct: &EnergyAccount) -> Result<f64> {
    if !(acct.input_work > 0.0) {
        return Err(Error::UndefinedEfficiency);
    }
    Ok((acct.output_work * 100.0 / acct.input_work).clamp(0.0, 100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const FRICTIONLESS: PlantParameters = PlantParameters {
        inertia: 1.0,
        friction: 0.0,
        dt: 1e-3,
    };

    #[test]
    fn free_motion_conserves_velocity_exactly() {
        let mut s = JointState { q: 0.0, q_dot: 1.0 };
        let s1 = step(&FRICTIONLESS, &s, 0.0, &FaultEffects::NONE).unwrap();
        assert_eq!(s1.q_dot, 1.0);
        assert_eq!(s1.q, 1e-3);
        for _ in 0..10_000 {
            s = step(&FRICTIONLESS, &s, 0.0, &FaultEffects::NONE).unwrap();
            assert_eq!(s.q_dot.to_bits(), 1.0f64.to_bits());
        }
    }

    #[test]
    fn ballistic_matches_discrete_closed_form() {
        // Semi-implicit Euler from rest gives q_n = a dt² n(n+1)/2 exactly,
        // i.e. an O(dt) overshoot of a·dt·t/2 over the continuous a t²/2.
        let p = PlantParameters { inertia: 2.0, ..FRICTIONLESS };
        let tau0 = 3.0;
        let a = tau0 / p.inertia;
        let mut s = JointState::default();
        for _ in 0..1000 {
            s = step(&p, &s, tau0, &FaultEffects::NONE).unwrap();
        }
        let continuous = a * 0.5;
        assert!((s.q - continuous - a * p.dt * 1.0 / 2.0).abs() < 1e-12);
        assert!((s.q_dot - a).abs() < 1e-12);
    }

    #[test]
    fn bias_fault_adds_acceleration() {
        let p = PlantParameters { inertia: 2.0, ..FRICTIONLESS };
        let fx = FaultEffects::at(
            &[FaultEvent {
                onset: 0.0,
                duration: 1.0,
                kind: FaultKind::BiasTorque,
                magnitude: 0.8,
            }],
            0.5,
        );
        let s = step(&p, &JointState::default(), 1.0, &fx).unwrap();
        assert!((s.q_dot - p.dt * (1.0 + 0.8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fault_windows_and_effects() {
        let faults = [
            FaultEvent {
                onset: 1.0,
                duration: 2.0,
                kind: FaultKind::OverheatDrift,
                magnitude: 0.5,
            },
            FaultEvent {
                onset: 2.0,
                duration: 1.0,
                kind: FaultKind::SensorOffset,
                magnitude: 0.03,
            },
        ];
        assert_eq!(FaultEffects::at(&faults, 0.5), FaultEffects::NONE);
        let fx = FaultEffects::at(&faults, 2.5);
        assert!(fx.any_active);
        assert_eq!(fx.friction_scale, OVERHEAT_FRICTION_SCALE);
        assert!((fx.temperature_rise - 0.75).abs() < 1e-12);
        assert_eq!(fx.position_offset, 0.03);
        assert!(!FaultEffects::at(&faults, 3.0).any_active);
    }

    #[test]
    fn divergence_is_reported() {
        let s = JointState { q: 0.0, q_dot: f64::MAX };
        let p = PlantParameters { dt: 0.01, ..FRICTIONLESS };
        assert!(matches!(
            step(&p, &s, f64::MAX, &FaultEffects::NONE),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(PlantParameters::default().validate().is_ok());
        for bad in [
            PlantParameters { inertia: 0.0, ..Default::default() },
            PlantParameters { friction: -0.1, ..Default::default() },
            PlantParameters { dt: 0.02, ..Default::default() },
            PlantParameters { dt: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        let f = FaultEvent {
            onset: 1.0,
            duration: 0.0,
            kind: FaultKind::BiasTorque,
            magnitude: 1.0,
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn plant_readout_tracks_heat_and_acceleration() {
        let mut plant = Plant::new(
            PlantParameters::default(),
            ThermalParameters::default(),
            JointState::default(),
        );
        for _ in 0..1000 {
            plant.advance(5.0, 0.0, &FaultEffects::NONE).unwrap();
        }
        let r = plant.readout(0.2, &FaultEffects::NONE);
        assert!(r.temperature > 25.0);
        assert_eq!(r.torque, 5.0);
        assert!(r.vibration > 0.0);
        assert_eq!(r.commanded_position, 0.2);
    }

    #[test]
    fn energy_of_constant_integrand() {
        let mut acct = EnergyAccount::default();
        for _ in 0..3000 {
            acct = accumulate_energy(&acct, 1.0, 2.0, 0.0, 1e-3).unwrap();
        }
        assert!((acct.input_work - 6.0).abs() < 1e-9);
        assert!((acct.elapsed - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_torque_costs_nothing() {
        let mut acct = EnergyAccount::default();
        for k in 0..100 {
            acct = accumulate_energy(&acct, 0.0, k as f64, 0.0, 1e-3).unwrap();
        }
        assert_eq!(acct.input_work, 0.0);
        assert_eq!(efficiency(&acct), Err(Error::UndefinedEfficiency));
    }

    #[test]
    fn trapezoid_on_linear_ramp_is_exact() {
        // |τ q̇| = t on [0, 1]: integral 1/2
        let dt = 1e-2;
        let mut acct = accumulate_energy(&EnergyAccount::default(), 0.0, 0.0, 0.0, dt).unwrap();
        acct.input_work = 0.0;
        for k in 1..=100 {
            acct = accumulate_energy(&acct, 1.0, k as f64 * dt, 0.0, dt).unwrap();
        }
        assert!((acct.input_work - 0.5).abs() < 1e-12);
    }

    #[test]
    fn useful_work_is_clipped() {
        let a = accumulate_energy(&EnergyAccount::default(), 1.0, 1.0, 5.0, 0.1).unwrap();
        assert_eq!(a.output_work, a.input_work);
        let b = accumulate_energy(&a, 1.0, 1.0, -5.0, 0.1).unwrap();
        assert_eq!(b.output_work, a.output_work);
        assert!(matches!(
            accumulate_energy(&a, f64::NAN, 1.0, 0.0, 0.1),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            accumulate_energy(&a, 1.0, 1.0, 0.0, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn efficiency_examples() {
        let acct = |o: f64, i: f64| EnergyAccount {
            input_work: i,
            output_work: o,
            ..Default::default()
        };
        assert_eq!(efficiency(&acct(84.0, 100.0)).unwrap(), 84.0);
        assert_eq!(efficiency(&acct(3.0, 3.0)).unwrap(), 100.0);
        assert_eq!(efficiency(&acct(0.0, 3.0)).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn friction_never_speeds_up(q_dot in -50.0f64..50.0, b in 0.01f64..5.0) {
            let p = PlantParameters { friction: b, ..Default::default() };
            let mut s = JointState { q: 0.0, q_dot };
            for _ in 0..50 {
                let n = step(&p, &s, 0.0, &FaultEffects::NONE).unwrap();
                prop_assert!(n.q_dot.abs() <= s.q_dot.abs());
                s = n;
            }
        }

        #[test]
        fn energy_symmetric_and_monotone(
            samples in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50),
        ) {
            let mut a = EnergyAccount::default();
            let mut b = EnergyAccount::default();
            for (tau, v) in samples {
                let na = accumulate_energy(&a, tau, v, 0.1, 1e-3).unwrap();
                let nb = accumulate_energy(&b, -tau, -v, 0.1, 1e-3).unwrap();
                prop_assert!(na.input_work >= a.input_work);
                prop_assert!(na.output_work <= na.input_work + 1e-9);
                a = na;
                b = nb;
            }
            prop_assert_eq!(a.input_work, b.input_work);
            if a.input_work > 0.0 {
                let eta = efficiency(&a).unwrap();
                prop_assert!((0.0..=100.0).contains(&eta));
            }
        }
    }

    #[test]
    fn fault_list_helper() {
        let v = vec![FaultEvent {
            onset: 0.0,
            duration: 1.0,
            kind: FaultKind::SensorOffset,
            magnitude: 0.1,
        }];
        assert!(v[0].is_active(0.0));
        assert!(!v[0].is_active(1.0));
    }
}
