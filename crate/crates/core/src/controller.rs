//! PID position control with fixed or policy-scheduled gains.
//!
//! The commanded speed is the PID combination of the scalar error signal,
//! squashed into (-1, 1) m/s by `v / (|v| + 1)` and applied along the unit
//! vector from the drone towards its target.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{self, normalize_observation, NetworkParams, ACT_DIM};
use crate::simenv::ErrorSignal;
use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("adaptive controller has no policy loaded")]
    PolicyNotLoaded,
    #[error("invalid gain bounds: {0}")]
    InvalidBounds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Gains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn within(&self, b: &GainBounds) -> bool {
        (0.0..=b.kp_max).contains(&self.kp)
            && (0.0..=b.ki_max).contains(&self.ki)
            && (0.0..=b.kd_max).contains(&self.kd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    pub kp_max: f64,
    pub ki_max: f64,
    pub kd_max: f64,
}

impl Default for GainBounds {
    fn default() -> Self {
        Self { kp_max: 4.0, ki_max: 0.5, kd_max: 2.0 }
    }
}

impl GainBounds {
    pub fn validate(&self) -> Result<(), ControllerError> {
        for (name, v) in [("kp_max", self.kp_max), ("ki_max", self.ki_max), ("kd_max", self.kd_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ControllerError::InvalidBounds(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerMode {
    FixedPid(Gains),
    /// Gains are queried from the policy network every control step.
    AdaptivePolicy(Option<Arc<NetworkParams>>),
    /// Constant gains extracted from a trained policy near the target.
    FrozenSteadyState(Gains),
}

impl ControllerMode {
    pub fn adaptive(params: NetworkParams) -> Self {
        ControllerMode::AdaptivePolicy(Some(Arc::new(params)))
    }
}

/// Linear PID law: `kp * pe + kd * dpe + ki * ipe`.
pub fn pid_speed(g: &Gains, e: &ErrorSignal) -> f64 {
    g.kp * e.pe + g.kd * e.dpe + g.ki * e.ipe
}

/// Maps any finite speed into (-1, 1), odd and strictly increasing.
pub fn normalize_speed(v: f64) -> f64 {
    v / (v.abs() + 1.0)
}

/// Points the scalar speed along the unit error vector; zero when the drone
/// sits on the target.
pub fn command_vector(norm_v: f64, target: Vec3, position: Vec3) -> Vec3 {
    let d = target - position;
    let n = d.norm();
    if n < 1e-9 {
        return Vec3::ZERO;
    }
    d * (norm_v / n)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid squash of raw policy outputs into `[0, max]` per gain.
pub fn squash_gains(raw: &[f64; ACT_DIM], b: &GainBounds) -> Gains {
    Gains::new(b.kp_max * sigmoid(raw[0]), b.ki_max * sigmoid(raw[1]), b.kd_max * sigmoid(raw[2]))
}

pub enum Sampling<'a, R: Rng + ?Sized> {
    /// Use the Gaussian means.
    Deterministic,
    Stochastic(&'a mut R),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub gains: Gains,
    pub v_cmd: Vec3,
    /// Pre-squash Gaussian action; `None` for fixed-gain modes.
    pub raw_action: Option<[f64; ACT_DIM]>,
    pub log_prob: Option<f64>,
    /// Critic estimate at the observation, when a policy was queried.
    pub value: Option<f64>,
}

/// Turns gains plus an error signal into a velocity command.
pub fn compose_command(g: &Gains, e: &ErrorSignal, target: Vec3, position: Vec3) -> Vec3 {
    command_vector(normalize_speed(pid_speed(g, e)), target, position)
}

pub fn act<R: Rng + ?Sized>(
    mode: &ControllerMode,
    e: &ErrorSignal,
    target: Vec3,
    position: Vec3,
    bounds: &GainBounds,
    sampling: Sampling<'_, R>,
) -> Result<Action, ControllerError> {
    match mode {
        ControllerMode::FixedPid(g) | ControllerMode::FrozenSteadyState(g) => Ok(Action {
            gains: *g,
            v_cmd: compose_command(g, e, target, position),
            raw_action: None,
            log_prob: None,
            value: None,
        }),
        ControllerMode::AdaptivePolicy(None) => Err(ControllerError::PolicyNotLoaded),
        ControllerMode::AdaptivePolicy(Some(params)) => {
            let out = neural::forward(params, &normalize_observation(e));
            let (raw, log_prob) = match sampling {
                Sampling::Deterministic => {
                    (out.mean, neural::log_prob(&out.mean, &out.mean, &out.log_std))
                }
                Sampling::Stochastic(rng) => neural::sample_action(&out.mean, &out.log_std, rng),
            };
            let gains = squash_gains(&raw, bounds);
            Ok(Action {
                gains,
                v_cmd: compose_command(&gains, e, target, position),
                raw_action: Some(raw),
                log_prob: Some(log_prob),
                value: Some(out.value),
            })
        }
    }
}

/// Deterministic policy gains at a probe signal, used as the constant-gain
/// baseline.
pub fn extract_steady_gains(params: &NetworkParams, probe: &ErrorSignal, bounds: &GainBounds) -> Gains {
    let out = neural::forward(params, &normalize_observation(probe));
    squash_gains(&out.mean, bounds)
}
