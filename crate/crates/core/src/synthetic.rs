//! Idealized walking traces for demos and tests.
//!
//! The hip follows a cosine between 20 deg flexion at heel strike and 20 deg
//! extension at mid-cycle, the foot is on the ground for the first 60 % of
//! each cycle, and the assistive torque is the profile's own curve. The
//! right leg runs half a cycle behind the left.

use std::f64::consts::TAU;

use crate::gait::{GaitError, GaitTrace, LegChannels};
use crate::profile::TorqueProfileFeatures;

pub const HIP_AMPLITUDE_DEG: f64 = 20.0;
pub const STANCE_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkingPattern {
    pub strides: usize,
    pub stride_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for WalkingPattern {
    fn default() -> Self {
        Self {
            strides: 8,
            stride_s: 1.1,
            sample_rate_hz: 100.0,
        }
    }
}

fn leg(profile: &TorqueProfileFeatures, pattern: &WalkingPattern, t: &[f64], offset: f64) -> LegChannels {
    let phase: Vec<f64> = t.iter().map(|&t| (t / pattern.stride_s + offset).rem_euclid(1.0)).collect();
    let hip_rate = HIP_AMPLITUDE_DEG.to_radians() * TAU / pattern.stride_s;
    LegChannels {
        hip_deg: phase.iter().map(|p| HIP_AMPLITUDE_DEG * (TAU * p).cos()).collect(),
        knee_deg: phase.iter().map(|p| 5.0 + 27.5 * (1.0 - (TAU * p).cos())).collect(),
        contact: Some(phase.iter().map(|&p| p < STANCE_FRACTION).collect()),
        torque_nm: Some(phase.iter().map(|&p| profile.torque_at(p)).collect()),
        omega_rads: Some(phase.iter().map(|p| -hip_rate * (TAU * p).sin()).collect()),
    }
}

/// Walking under `profile` for `pattern.strides` full strides.
pub fn walking_trace(profile: &TorqueProfileFeatures, pattern: &WalkingPattern) -> Result<GaitTrace, GaitError> {
    let n = (pattern.strides as f64 * pattern.stride_s * pattern.sample_rate_hz).round() as usize + 1;
    let time_s: Vec<f64> = (0..n).map(|i| i as f64 / pattern.sample_rate_hz).collect();
    let left = leg(profile, pattern, &time_s, 0.0);
    let right = leg(profile, pattern, &time_s, 0.5);
    GaitTrace::new(time_s, left, right)
}
