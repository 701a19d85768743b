//! Simulated sensor acquisition, warm-up calibration and min-max scaling.
//!
//! A frame carries [`CHANNELS`] readings in the fixed order of [`Channel`].
//! The following-error channel is the drive's own readout of commanded minus
//! measured position, so it inherits the position channel's noise and any
//! sensor offset.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::controller::JointState;
use crate::{Error, Result};

pub const CHANNELS: usize = 6;

/// Range below which a channel is treated as constant.
pub const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Channel {
    Position = 0,
    Velocity = 1,
    Torque = 2,
    Temperature = 3,
    Vibration = 4,
    FollowingError = 5,
}

/// One timestamped set of raw readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub time: f64,
    pub channels: Vec<f64>,
}

impl SensorFrame {
    pub fn get(&self, channel: Channel) -> f64 {
        self.channels[channel as usize]
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Joint state as seen through the position and velocity channels.
    pub fn measured_state(&self) -> JointState {
        JointState {
            q: self.get(Channel::Position),
            q_dot: self.get(Channel::Velocity),
        }
    }
}

/// Plant internals that are observable but not part of the joint state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantReadout {
    /// Torque applied by the actuator over the last step (N·m).
    pub torque: f64,
    /// Winding temperature (°C).
    pub temperature: f64,
    /// Acceleration magnitude over the last step (rad/s²).
    pub vibration: f64,
    /// Position currently commanded to the joint (rad).
    pub commanded_position: f64,
    /// Additive offset on the position encoder (rad).
    pub position_offset: f64,
}

/// Per-channel Gaussian noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorNoise {
    pub position: f64,
    pub velocity: f64,
    pub torque: f64,
    pub temperature: f64,
    pub vibration: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            position: 1e-3,
            velocity: 1e-2,
            torque: 1e-2,
            temperature: 5e-2,
            vibration: 1e-2,
        }
    }
}

impl SensorNoise {
    pub const ZERO: Self = Self {
        position: 0.0,
        velocity: 0.0,
        torque: 0.0,
        temperature: 0.0,
        vibration: 0.0,
    };

    fn as_array(&self) -> [f64; 5] {
        [
            self.position,
            self.velocity,
            self.torque,
            self.temperature,
            self.vibration,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|s| s.is_finite() && *s >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "sensor noise std-devs must be finite and >= 0, got {self:?}"
            )))
        }
    }
}

/// Reads every channel once, adding independent Gaussian noise.
///
/// The generator is advanced by exactly five normal draws per call, whatever
/// the noise levels, so frame `k` of a run always consumes the same slice of
/// the stream.
pub fn sample_sensors<R: Rng + ?Sized>(
    time: f64,
    state: &JointState,
    readout: &PlantReadout,
    noise: &SensorNoise,
    rng: &mut R,
) -> Result<SensorFrame> {
    noise.validate()?;
    let truth = [
        state.q,
        state.q_dot,
        readout.torque,
        readout.temperature,
        readout.vibration,
    ];
    if !truth.iter().all(|v| v.is_finite())
        || !readout.commanded_position.is_finite()
        || !readout.position_offset.is_finite()
    {
        return Err(Error::Divergence(format!(
            "non-finite plant state while sampling at t={time}: {state:?} {readout:?}"
        )));
    }
    let sigma = noise.as_array();
    let mut channels = Vec::with_capacity(CHANNELS);
    for (value, sd) in truth.iter().zip(sigma) {
        let z: f64 = StandardNormal.sample(rng);
        channels.push(value + sd * z);
    }
    channels[Channel::Position as usize] += readout.position_offset;
    let following = readout.commanded_position - channels[Channel::Position as usize];
    channels.push(following);
    Ok(SensorFrame { time, channels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

impl ChannelRange {
    fn new(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            degenerate: max - min < DEGENERATE_RANGE,
        }
    }
}

/// Per-channel extrema observed over a calibration window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCalibration {
    pub channels: Vec<ChannelRange>,
}

impl ChannelCalibration {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

pub fn calibrate(frames: &[SensorFrame]) -> Result<ChannelCalibration> {
    let first = frames.first().ok_or(Error::EmptyCalibration)?;
    let n = first.len();
    let mut lo = first.channels.clone();
    let mut hi = first.channels.clone();
    for frame in &frames[1..] {
        if frame.len() != n {
            return Err(Error::Shape(format!(
                "calibration frame at t={} has {} channels, expected {n}",
                frame.time,
                frame.len()
            )));
        }
        for (i, &x) in frame.channels.iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    Ok(ChannelCalibration {
        channels: lo
            .into_iter()
            .zip(hi)
            .map(|(min, max)| ChannelRange::new(min, max))
            .collect(),
    })
}

/// A frame rescaled into `[0, 1]` per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedFrame {
    pub time: f64,
    pub values: Vec<f64>,
}

/// Min-max scaling against a fixed calibration.
///
/// Constant channels map to 0. Readings outside the calibrated range are
/// clamped so every output stays in `[0, 1]`.
pub fn normalize(frame: &SensorFrame, calib: &ChannelCalibration) -> Result<NormalizedFrame> {
    if frame.len() != calib.len() {
        return Err(Error::Shape(format!(
            "frame has {} channels but calibration has {}",
            frame.len(),
            calib.len()
        )));
    }
    let values = frame
        .channels
        .iter()
        .zip(&calib.channels)
        .map(|(&x, range)| {
            if range.degenerate {
                0.0
            } else {
                ((x - range.min) / (range.max - range.min)).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(NormalizedFrame {
        time: frame.time,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use alloc::vec;
    use proptest::prelude::*;

    fn frame(time: f64, channels: Vec<f64>) -> SensorFrame {
        SensorFrame { time, channels }
    }

    #[test]
    fn zero_noise_reads_truth() {
        let mut rng = seeded(1);
        let state = JointState { q: 0.5, q_dot: -0.25 };
        let readout = PlantReadout {
            torque: 1.5,
            temperature: 30.0,
            vibration: 0.2,
            commanded_position: 0.75,
            position_offset: 0.0,
        };
        let f = sample_sensors(0.0, &state, &readout, &SensorNoise::ZERO, &mut rng).unwrap();
        assert_eq!(f.get(Channel::Position), 0.5);
        assert_eq!(f.get(Channel::Velocity), -0.25);
        assert_eq!(f.get(Channel::Torque), 1.5);
        assert_eq!(f.get(Channel::FollowingError), 0.25);
        assert_eq!(f.len(), CHANNELS);
    }

    #[test]
    fn sensor_offset_shifts_position_and_following_error() {
        let mut rng = seeded(1);
        let readout = PlantReadout {
            commanded_position: 1.0,
            position_offset: 0.1,
            ..Default::default()
        };
        let f = sample_sensors(
            0.0,
            &JointState { q: 1.0, q_dot: 0.0 },
            &readout,
            &SensorNoise::ZERO,
            &mut rng,
        )
        .unwrap();
        assert!((f.get(Channel::Position) - 1.1).abs() < 1e-15);
        assert!((f.get(Channel::FollowingError) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_frames() {
        let noise = SensorNoise::default();
        let state = JointState { q: 0.3, q_dot: 0.1 };
        let run = || {
            let mut rng = seeded(99);
            (0..5)
                .map(|k| {
                    sample_sensors(k as f64, &state, &PlantReadout::default(), &noise, &mut rng)
                        .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noise_std_matches_configuration() {
        let noise = SensorNoise {
            position: 0.01,
            ..SensorNoise::ZERO
        };
        let mut rng = seeded(2024);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                sample_sensors(
                    0.0,
                    &JointState { q: 2.0, q_dot: 0.0 },
                    &PlantReadout::default(),
                    &noise,
                    &mut rng,
                )
                .unwrap()
                .get(Channel::Position)
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let sd = libm::sqrt(var);
        assert!((0.008..=0.012).contains(&sd), "sample std {sd}");
    }

    #[test]
    fn non_finite_state_is_divergence() {
        let mut rng = seeded(0);
        let err = sample_sensors(
            3.0,
            &JointState {
                q: f64::NAN,
                q_dot: 0.0,
            },
            &PlantReadout::default(),
            &SensorNoise::ZERO,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn negative_noise_rejected() {
        let mut rng = seeded(0);
        let noise = SensorNoise {
            torque: -1.0,
            ..SensorNoise::ZERO
        };
        assert!(matches!(
            sample_sensors(0.0, &JointState::default(), &PlantReadout::default(), &noise, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn calibration_extrema_and_degenerate_flags() {
        let frames = vec![
            frame(0.0, vec![2.0, 5.0]),
            frame(0.1, vec![4.0, 5.0]),
            frame(0.2, vec![6.0, 5.0]),
        ];
        let c = calibrate(&frames).unwrap();
        assert_eq!(c.channels[0].min, 2.0);
        assert_eq!(c.channels[0].max, 6.0);
        assert!(!c.channels[0].degenerate);
        assert!(c.channels[1].degenerate);

        let single = calibrate(&frames[..1]).unwrap();
        assert_eq!(single.channels[0].min, 2.0);
        assert_eq!(single.channels[0].max, 2.0);
        assert!(single.channels[0].degenerate);

        assert_eq!(calibrate(&[]), Err(Error::EmptyCalibration));
    }

    #[test]
    fn calibration_rejects_ragged_frames() {
        let frames = vec![frame(0.0, vec![1.0, 2.0]), frame(0.1, vec![1.0])];
        assert!(matches!(calibrate(&frames), Err(Error::Shape(_))));
    }

    #[test]
    fn normalize_endpoints_midpoint_and_degenerate() {
        let c = calibrate(&[
            frame(0.0, vec![2.0, 5.0]),
            frame(0.1, vec![4.0, 5.0]),
            frame(0.2, vec![6.0, 5.0]),
        ])
        .unwrap();
        let at = |x: f64, y: f64| normalize(&frame(1.0, vec![x, y]), &c).unwrap().values;
        assert_eq!(at(2.0, 5.0), vec![0.0, 0.0]);
        assert_eq!(at(6.0, 123.0), vec![1.0, 0.0]);
        assert_eq!(at(4.0, -7.0)[0], 0.5);
        assert_eq!(at(-10.0, 0.0)[0], 0.0);
        assert_eq!(at(10.0, 0.0)[0], 1.0);
        assert!(matches!(
            normalize(&frame(0.0, vec![1.0]), &c),
            Err(Error::Shape(_))
        ));
    }

    proptest! {
        #[test]
        fn normalize_is_monotone_and_bounded(
            lo in -100.0f64..100.0,
            span in 1e-6f64..50.0,
            a in -200.0f64..200.0,
            b in -200.0f64..200.0,
        ) {
            let c = calibrate(&[frame(0.0, vec![lo]), frame(1.0, vec![lo + span])]).unwrap();
            let na = normalize(&frame(2.0, vec![a]), &c).unwrap().values[0];
            let nb = normalize(&frame(2.0, vec![b]), &c).unwrap().values[0];
            prop_assert!((0.0..=1.0).contains(&na));
            if a <= b {
                prop_assert!(na <= nb);
            }
        }

        #[test]
        fn calibration_window_spans_unit_interval(
            xs in proptest::collection::vec(-10.0f64..10.0, 2..40),
        ) {
            let frames: Vec<_> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| frame(i as f64, vec![x]))
                .collect();
            let c = calibrate(&frames).unwrap();
            prop_assume!(!c.channels[0].degenerate);
            let vals: Vec<f64> = frames
                .iter()
                .map(|f| normalize(f, &c).unwrap().values[0])
                .collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, 1.0);
        }
    }
}
