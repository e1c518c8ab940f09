//! Simulated delta-robot rig: end-effector, stepper motor and a six-channel
//! force-torque sensor poking a spring-model fingertip.
//!
//! Time is virtual. The clock counts whole quanta of [`CLOCK_QUANTUM`] seconds,
//! so timestamps are exact multiples of the quantum and a full session runs
//! as fast as the CPU allows.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ContactThreshold, Pose3, TouchParams, WORKSPACE_BOUND};

/// Virtual clock resolution, seconds.
pub const CLOCK_QUANTUM: f64 = 0.01;
const TICKS_PER_SECOND: f64 = 100.0;

/// Stepper calibration: motor steps per millimetre of pin separation.
pub const STEPS_PER_MM: f64 = 363.0;

/// Sensor resolution. Readings are quantized to this so that stored
/// recordings survive a text round trip unchanged.
pub const FT_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigError {
    #[error("rig not ready: {0}")]
    Lifecycle(&'static str),
    #[error("target {0} outside the ±{WORKSPACE_BOUND} m workspace")]
    Workspace(Pose3),
    #[error("non-finite motion command {0}")]
    NonFinite(Pose3),
    #[error("stepper distance {0} m must be non-negative")]
    NegativeDistance(f64),
}

/// Device lifecycle: power on, initialise, then check before any motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Lifecycle {
    pub powered: bool,
    pub initialised: bool,
    pub checked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigState {
    /// Global end-effector position, meters.
    pub effector_pose: Pose3,
    /// Current stepper pin separation, meters.
    pub stepper_separation: f64,
    pub lifecycle: Lifecycle,
    ticks: u64,
}

impl Default for RigState {
    fn default() -> Self {
        Self::new()
    }
}

/// Converts seconds to clock ticks, rounding up so a move never takes less
/// than it asked for.
pub fn ticks_for(seconds: f64) -> u64 {
    if seconds <= 0.0 {
        return 0;
    }
    (seconds * TICKS_PER_SECOND - 1e-9).ceil() as u64
}

pub fn seconds_for(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_SECOND
}

impl RigState {
    /// A powered-off rig with the effector at the origin.
    pub fn new() -> Self {
        Self {
            effector_pose: Pose3::ZERO,
            stepper_separation: 0.0,
            lifecycle: Lifecycle::default(),
            ticks: 0,
        }
    }

    /// A rig that has gone through power-on, initialisation and check.
    pub fn ready() -> Self {
        Self::new()
            .power_on()
            .initialise()
            .and_then(|r| r.check())
            .expect("fresh rig lifecycle")
    }

    pub fn power_on(mut self) -> Self {
        self.lifecycle.powered = true;
        self
    }

    pub fn initialise(mut self) -> Result<Self, RigError> {
        if !self.lifecycle.powered {
            return Err(RigError::Lifecycle("power on before initialisation"));
        }
        self.lifecycle.initialised = true;
        Ok(self)
    }

    pub fn check(mut self) -> Result<Self, RigError> {
        if !self.lifecycle.initialised {
            return Err(RigError::Lifecycle("initialise before check"));
        }
        self.lifecycle.checked = true;
        Ok(self)
    }

    pub fn sim_time(&self) -> f64 {
        seconds_for(self.ticks)
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn advance(mut self, ticks: u64) -> Self {
        self.ticks += ticks;
        self
    }

    fn require_motion_ready(&self) -> Result<(), RigError> {
        if !(self.lifecycle.initialised && self.lifecycle.checked) {
            return Err(RigError::Lifecycle("motion requires an initialised and checked rig"));
        }
        Ok(())
    }

    /// Moves by `delta` from the current pose along a straight segment.
    pub fn move_relative(&self, delta: Pose3, min_duration: f64) -> Result<Self, RigError> {
        if !delta.is_finite() {
            return Err(RigError::NonFinite(delta));
        }
        self.move_global(self.effector_pose + delta, min_duration)
    }

    /// Moves to the absolute `target` along a straight segment.
    pub fn move_global(&self, target: Pose3, min_duration: f64) -> Result<Self, RigError> {
        self.require_motion_ready()?;
        if !target.is_finite() {
            return Err(RigError::NonFinite(target));
        }
        if !target.in_workspace() {
            return Err(RigError::Workspace(target));
        }
        let mut next = *self;
        next.effector_pose = target;
        next.ticks += ticks_for(min_duration);
        Ok(next)
    }

    pub fn set_stepper(&self, distance: f64) -> Result<Self, RigError> {
        stepper_steps(distance)?;
        let mut next = *self;
        next.stepper_separation = distance;
        Ok(next)
    }

    /// Reads the FT sensor at the current pose and time. The `touched` flag
    /// of the returned sample is always false; it is set by the motion that
    /// produced the reading.
    pub fn sample_ft<R: Rng + ?Sized>(&self, finger: &FingerModel, rng: &mut R) -> Result<FtSample, RigError> {
        if !self.lifecycle.initialised {
            return Err(RigError::Lifecycle("sensor requires an initialised rig"));
        }
        let force_noise = Normal::new(0.0, finger.noise_std_force).expect("finite noise std");
        let torque_noise = Normal::new(0.0, finger.noise_std_torque).expect("finite noise std");
        let mut noise = [0.0; 6];
        for (i, n) in noise.iter_mut().enumerate() {
            *n = if i < 3 {
                force_noise.sample(rng)
            } else {
                torque_noise.sample(rng)
            };
        }
        let fz = -finger.stiffness * finger.penetration(self.effector_pose);
        Ok(FtSample {
            touched: false,
            timestamp: self.sim_time(),
            fx: quantize(noise[0]),
            fy: quantize(noise[1]),
            fz: quantize(fz + noise[2]),
            tx: quantize(noise[3]),
            ty: quantize(noise[4]),
            tz: quantize(noise[5]),
        })
    }

    /// Descends along `poking` until the sensor reports contact or the full
    /// vector has been travelled, then records a fixed window of readings at
    /// the stop pose.
    pub fn execute_poke<R: Rng + ?Sized>(
        &self,
        poking: Pose3,
        params: &PokeParams,
        finger: &FingerModel,
        rng: &mut R,
    ) -> Result<(Self, PokeResult), RigError> {
        self.require_motion_ready()?;
        if !poking.is_finite() {
            return Err(RigError::NonFinite(poking));
        }
        let start = self.effector_pose;
        let end = start + poking;
        if !end.in_workspace() {
            return Err(RigError::Workspace(end));
        }

        let wait = ticks_for(params.event_time_wait).max(1);
        let duration = ticks_for(params.poking_duration).max(1);
        let mut state = *self;
        let mut descent = Vec::new();
        let mut stopped_on_contact = false;

        if poking != Pose3::ZERO {
            let steps = duration.div_ceil(wait);
            for k in 1..=steps {
                let elapsed = (k * wait).min(duration);
                let frac = elapsed as f64 / duration as f64;
                state.effector_pose = if elapsed == duration {
                    end
                } else {
                    start + poking.scale(frac)
                };
                state.ticks = self.ticks + elapsed;
                let sample = state.sample_ft(finger, rng)?;
                descent.push(sample);
                if detect_contact(&sample, &params.threshold) {
                    stopped_on_contact = true;
                    break;
                }
            }
        }

        let count = params.number_ftdata_recordings as usize;
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            state.ticks += wait;
            let mut sample = state.sample_ft(finger, rng)?;
            sample.touched = stopped_on_contact;
            samples.push(sample);
        }

        let result = PokeResult {
            recording: FtRecording {
                samples,
                touched: stopped_on_contact,
            },
            descent,
            stop_pose: state.effector_pose,
            stopped_on_contact,
        };
        Ok((state, result))
    }
}

/// Spring-contact fingertip under the poking pins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerModel {
    /// Height of the skin surface, meters.
    pub surface_height: f64,
    pub center_y: f64,
    pub half_width: f64,
    /// N/m
    pub stiffness: f64,
    pub noise_std_force: f64,
    pub noise_std_torque: f64,
}

impl Default for FingerModel {
    /// Fingertip 1 cm below the home pose, wide enough to sit under both
    /// pin carriers.
    fn default() -> Self {
        Self {
            surface_height: -0.085,
            center_y: 0.0,
            half_width: 0.03,
            stiffness: 500.0,
            noise_std_force: 0.01,
            noise_std_torque: 0.001,
        }
    }
}

impl FingerModel {
    /// No finger on the rest: the surface is far below anything reachable.
    pub fn absent() -> Self {
        Self {
            surface_height: -10.0,
            ..Self::default()
        }
    }

    pub fn noiseless(self) -> Self {
        Self {
            noise_std_force: 0.0,
            noise_std_torque: 0.0,
            ..self
        }
    }

    pub fn is_valid(&self) -> bool {
        self.stiffness > 0.0
            && self.half_width > 0.0
            && self.noise_std_force >= 0.0
            && self.noise_std_torque >= 0.0
            && self.surface_height.is_finite()
            && self.center_y.is_finite()
    }

    pub fn penetration(&self, tip: Pose3) -> f64 {
        if (tip.v2 - self.center_y).abs() > self.half_width {
            return 0.0;
        }
        (self.surface_height - tip.v3).max(0.0)
    }
}

/// One six-channel reading: forces in N, torques in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtSample {
    pub touched: bool,
    pub timestamp: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl FtSample {
    pub fn channels(&self) -> [f64; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    /// Console rendering, e.g. `FT [touched=TRUE] 4.520 0.001000 ...`.
    pub fn console_line(&self) -> String {
        format!(
            "FT [touched={}] {:.3} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            if self.touched { "TRUE" } else { "FALSE" },
            self.timestamp,
            self.fx,
            self.fy,
            self.fz,
            self.tx,
            self.ty,
            self.tz
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtRecording {
    pub samples: Vec<FtSample>,
    /// Whether the poke stopped on contact rather than at the end of travel.
    pub touched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PokeResult {
    pub recording: FtRecording,
    /// Readings polled while descending; the last one triggered the stop
    /// when `stopped_on_contact` is set.
    pub descent: Vec<FtSample>,
    pub stop_pose: Pose3,
    pub stopped_on_contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PokeParams {
    pub event_time_wait: f64,
    pub poking_duration: f64,
    pub number_ftdata_recordings: u32,
    pub threshold: ContactThreshold,
}

impl PokeParams {
    pub fn from_touch(touch: &TouchParams, number_ftdata_recordings: u32) -> Self {
        Self {
            event_time_wait: touch.event_time_wait,
            poking_duration: touch.poking_duration,
            number_ftdata_recordings,
            threshold: touch.threshold,
        }
    }
}

/// Contact when any channel reaches its threshold in magnitude.
pub fn detect_contact(sample: &FtSample, threshold: &ContactThreshold) -> bool {
    sample
        .channels()
        .iter()
        .zip(threshold.channels())
        .any(|(value, limit)| value.abs() >= limit)
}

/// Stepper steps for a pin separation given in meters.
pub fn stepper_steps(distance: f64) -> Result<f64, RigError> {
    if distance.is_nan() || distance < 0.0 {
        return Err(RigError::NegativeDistance(distance));
    }
    Ok(distance * 1000.0 * STEPS_PER_MM)
}

pub(crate) fn quantize(x: f64) -> f64 {
    // Dividing an integral value keeps the result the closest double to the
    // decimal reading, so `{:.6}` formatting parses back to the same value.
    (x / FT_RESOLUTION).round() / (1.0 / FT_RESOLUTION)
}
