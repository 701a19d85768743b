//! PD torque law and the discrete action table the decision network drives.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    /// Position (rad).
    pub q: f64,
    /// Velocity (rad/s).
    pub q_dot: f64,
}

impl JointState {
    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.q_dot.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Setpoint {
    pub q_d: f64,
    pub q_dot_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PDGains {
    /// N·m/rad
    pub k_p: f64,
    /// N·m·s/rad
    pub k_d: f64,
}

impl PDGains {
    pub fn validate(&self) -> Result<()> {
        if self.k_p.is_finite() && self.k_d.is_finite() && self.k_p >= 0.0 && self.k_d >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("PD gains must be finite and >= 0, got {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueCommand {
    pub tau: f64,
    pub saturated: bool,
}

/// `τ = k_p (q_d − q) + k_d (q̇_d − q̇)`, clamped to `±tau_max`.
pub fn pd_torque(
    gains: &PDGains,
    sp: &Setpoint,
    state: &JointState,
    tau_max: f64,
) -> Result<TorqueCommand> {
    if !(tau_max > 0.0) {
        return Err(Error::Config(format!("tau_max must be > 0, got {tau_max}")));
    }
    let raw = gains.k_p * (sp.q_d - state.q) + gains.k_d * (sp.q_dot_d - state.q_dot);
    if !raw.is_finite() {
        return Err(Error::Numeric(format!(
            "PD torque from {gains:?}, {sp:?}, {state:?}"
        )));
    }
    let saturated = raw.abs() > tau_max;
    Ok(TorqueCommand {
        tau: raw.clamp(-tau_max, tau_max),
        saturated,
    })
}

/// What one discrete action does to the controller.
///
/// Scales compose multiplicatively with the current gains; `reset` first
/// restores the nominal gains and the task setpoint, then applies the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEntry {
    pub name: String,
    #[serde(default = "one")]
    pub kp_scale: f64,
    #[serde(default = "one")]
    pub kd_scale: f64,
    #[serde(default)]
    pub setpoint_offset: f64,
    #[serde(default)]
    pub reset: bool,
}

fn one() -> f64 {
    1.0
}

impl ActionEntry {
    pub fn hold() -> Self {
        Self::named("hold")
    }

    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            kp_scale: 1.0,
            kd_scale: 1.0,
            setpoint_offset: 0.0,
            reset: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kp_scale == 1.0 && self.kd_scale == 1.0 && self.setpoint_offset == 0.0 && !self.reset
    }
}

/// Inclusive bounds the action table keeps the gains within.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainLimits {
    pub k_p: [f64; 2],
    pub k_d: [f64; 2],
}

impl Default for GainLimits {
    fn default() -> Self {
        Self {
            k_p: [5.0, 200.0],
            k_d: [0.5, 30.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTable {
    pub entries: Vec<ActionEntry>,
    #[serde(default)]
    pub limits: GainLimits,
}

impl Default for ActionTable {
    /// hold, stiffen (k_p × 1.5), damp (k_d × 1.5), recover (reset).
    fn default() -> Self {
        Self {
            entries: vec![
                ActionEntry::hold(),
                ActionEntry {
                    kp_scale: 1.5,
                    ..ActionEntry::named("stiffen")
                },
                ActionEntry {
                    kd_scale: 1.5,
                    ..ActionEntry::named("damp")
                },
                ActionEntry {
                    reset: true,
                    ..ActionEntry::named("recover")
                },
            ],
            limits: GainLimits::default(),
        }
    }
}

impl ActionTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .entries
            .first()
            .ok_or_else(|| Error::Config("action table is empty".into()))?;
        if !first.is_identity() {
            return Err(Error::Config(format!(
                "action 0 must leave the controller unchanged, got {first:?}"
            )));
        }
        for e in &self.entries {
            let ok = e.kp_scale.is_finite()
                && e.kd_scale.is_finite()
                && e.kp_scale > 0.0
                && e.kd_scale > 0.0
                && e.setpoint_offset.is_finite();
            if !ok {
                return Err(Error::Config(format!("invalid action entry {e:?}")));
            }
        }
        let GainLimits { k_p, k_d } = self.limits;
        for [lo, hi] in [k_p, k_d] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::Config(format!("invalid gain limits {:?}", self.limits)));
            }
        }
        Ok(())
    }
}

/// Where `reset` actions return to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionContext {
    pub nominal: PDGains,
    pub reference: Setpoint,
}

pub fn apply_action(
    index: usize,
    table: &ActionTable,
    gains: PDGains,
    setpoint: Setpoint,
    home: &ActionContext,
) -> Result<(PDGains, Setpoint)> {
    let entry = table.entries.get(index).ok_or(Error::Action {
        index,
        actions: table.len(),
    })?;
    if entry.is_identity() {
        return Ok((gains, setpoint));
    }
    let (gains, mut setpoint) = if entry.reset {
        (home.nominal, home.reference)
    } else {
        (gains, setpoint)
    };
    let limits = &table.limits;
    let gains = PDGains {
        k_p: (gains.k_p * entry.kp_scale).clamp(limits.k_p[0], limits.k_p[1]),
        k_d: (gains.k_d * entry.kd_scale).clamp(limits.k_d[0], limits.k_d[1]),
    };
    setpoint.q_d += entry.setpoint_offset;
    Ok((gains, setpoint))
}
