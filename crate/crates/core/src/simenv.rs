//! Point-mass drone environment.
//!
//! The inner velocity/attitude loops of a real autopilot are collapsed into a
//! first-order lag on velocity: the vehicle tracks the commanded velocity with
//! time constant `tau_v`. Dynamics are integrated with semi-implicit Euler
//! (velocity first, then position) at a fixed step `dt`.
//!
//! An episode is a sequence of legs. A leg ends once the drone has stayed
//! within `settle_tolerance` of its target for `hold_steps` consecutive steps;
//! the leg reward `exp(10 * effective_speed)` is paid and a fresh target is
//! drawn. Every other step costs `step_penalty`. Episodes are truncated after
//! `episode_cap` steps.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::{Aabb, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("non-finite velocity command ({0:?}); controller fault")]
    NonFiniteCommand(Vec3),
    #[error("leg of {steps} steps is not longer than the {hold} step hold window")]
    LegTooShort { steps: u32, hold: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub tau_v: f64,
    pub workspace: Aabb,
    pub settle_tolerance: f64,
    pub hold_steps: u32,
    pub episode_cap: u32,
    pub seed: u64,
    pub wind: Vec3,
    /// Reward for every step that does not complete a leg.
    pub step_penalty: f64,
    /// Reward issued when a command exceeds `max_command_speed`; the episode is aborted.
    pub fault_penalty: f64,
    pub max_command_speed: f64,
    /// Upper clamp on the exponent of the leg reward.
    pub reward_exponent_cap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.04,
            tau_v: 0.3,
            workspace: Aabb::new(Vec3::new(-6.0, -6.0, 0.5), Vec3::new(6.0, 6.0, 3.0)),
            settle_tolerance: 0.1,
            hold_steps: 50,
            episode_cap: 1000,
            seed: 0,
            wind: Vec3::ZERO,
            step_penalty: -0.01,
            fault_penalty: -10.0,
            max_command_speed: 1.5,
            reward_exponent_cap: 30.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidConfig(msg.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if !(self.tau_v.is_finite() && self.tau_v > 0.0) {
            return bad("tau_v must be > 0");
        }
        if !(self.settle_tolerance.is_finite() && self.settle_tolerance > 0.0) {
            return bad("settle_tolerance must be > 0");
        }
        if self.hold_steps < 1 {
            return bad("hold_steps must be >= 1");
        }
        if self.episode_cap <= self.hold_steps {
            return bad("episode_cap must exceed hold_steps");
        }
        if !self.workspace.is_nondegenerate() {
            return bad("workspace box must be nondegenerate");
        }
        if !self.wind.is_finite() {
            return bad("wind must be finite");
        }
        if !(self.max_command_speed.is_finite() && self.max_command_speed > 0.0) {
            return bad("max_command_speed must be > 0");
        }
        if !self.step_penalty.is_finite() || !self.fault_penalty.is_finite() {
            return bad("penalties must be finite");
        }
        if !(self.reward_exponent_cap.is_finite() && self.reward_exponent_cap > 0.0) {
            return bad("reward_exponent_cap must be > 0");
        }
        Ok(())
    }
}

/// Controller observation: position error, its backward difference, and its
/// running integral since the current leg started.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSignal {
    pub pe: f64,
    pub dpe: f64,
    pub ipe: f64,
}

impl ErrorSignal {
    pub const fn new(pe: f64, dpe: f64, ipe: f64) -> Self {
        Self { pe, dpe, ipe }
    }

    pub fn is_finite(&self) -> bool {
        self.pe.is_finite() && self.dpe.is_finite() && self.ipe.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub target: Vec3,
    pub start_of_leg: Vec3,
    /// Accumulated `pe * dt` over the leg, including the latest observation.
    pub integral_pe: f64,
    /// Error at the latest observation; `None` before the leg's first one.
    pub prev_pe: Option<f64>,
    pub hold_counter: u32,
    pub leg_start_timestep: u32,
    pub episode_timestep: u32,
    /// Zero-based index of the current leg within the episode.
    pub leg_index: u32,
}

impl DroneState {
    /// Hovering at `position` with a fresh leg towards `target`.
    pub fn hover(position: Vec3, target: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::ZERO,
            target,
            start_of_leg: position,
            integral_pe: 0.0,
            prev_pe: None,
            hold_counter: 0,
            leg_start_timestep: 0,
            episode_timestep: 0,
            leg_index: 0,
        }
    }

    /// Steps elapsed in the current leg.
    pub fn leg_steps(&self) -> u32 {
        self.episode_timestep - self.leg_start_timestep
    }

    fn commit(&mut self, signal: &ErrorSignal) {
        self.integral_pe = signal.ipe;
        self.prev_pe = Some(signal.pe);
    }

    fn begin_leg(&mut self, target: Vec3, cfg: &SimConfig) -> ErrorSignal {
        self.target = target;
        self.start_of_leg = self.position;
        self.integral_pe = 0.0;
        self.prev_pe = None;
        self.hold_counter = 0;
        self.leg_start_timestep = self.episode_timestep;
        let signal = observe(self, cfg);
        self.commit(&signal);
        signal
    }
}

/// Summary of a leg that just completed its hold window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegInfo {
    pub leg_index: u32,
    pub start: Vec3,
    pub target: Vec3,
    pub distance: f64,
    pub leg_timesteps: u32,
    pub effective_speed: f64,
    /// Error integral at the final hold step, before the leg reset.
    pub final_ipe: f64,
    pub final_pe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Observation for the next control step (already relative to a new target
    /// when a leg completed).
    pub observation: ErrorSignal,
    pub reward: f64,
    pub leg_completed: bool,
    /// True when the episode ended this step, by truncation or abort.
    pub episode_done: bool,
    pub truncated: bool,
    /// The command violated the speed guard; the episode was aborted.
    pub aborted: bool,
    /// Position error after this step, measured against the target that was
    /// active during it.
    pub step_pe: f64,
    pub info: Option<LegInfo>,
}

/// Euclidean distance between target and current position.
pub fn position_error(target: Vec3, current: Vec3) -> f64 {
    (target - current).norm()
}

/// Error signal the controller would see at the current state.
///
/// `dpe` is zero on the first observation of a leg; `ipe` adds `pe * dt` to
/// the integral accumulated so far.
pub fn observe(state: &DroneState, cfg: &SimConfig) -> ErrorSignal {
    let pe = position_error(state.target, state.position);
    let dpe = match state.prev_pe {
        Some(prev) => (pe - prev) / cfg.dt,
        None => 0.0,
    };
    ErrorSignal::new(pe, dpe, state.integral_pe + pe * cfg.dt)
}

/// Uniform sample inside `workspace`.
pub fn sample_target<R: Rng + ?Sized>(rng: &mut R, workspace: &Aabb) -> Vec3 {
    let axis = |rng: &mut R, lo: f64, hi: f64| {
        let u: f64 = rng.random();
        // lo + u * (hi - lo) can round to just above hi
        (lo + u * (hi - lo)).min(hi)
    };
    let x = axis(rng, workspace.min.x, workspace.max.x);
    let y = axis(rng, workspace.min.y, workspace.max.y);
    let z = axis(rng, workspace.min.z, workspace.max.z);
    Vec3::new(x, y, z)
}

/// Leg distance over the time spent reaching the target, excluding the hold
/// window.
pub fn effective_speed(distance: f64, leg_timesteps: u32, dt: f64, hold_steps: u32) -> f64 {
    distance / (dt * f64::from(leg_timesteps - hold_steps))
}

/// Exponential leg reward, with the exponent clamped at `cfg.reward_exponent_cap`.
pub fn compute_leg_reward(distance: f64, leg_timesteps: u32, cfg: &SimConfig) -> Result<f64, SimError> {
    if leg_timesteps <= cfg.hold_steps {
        return Err(SimError::LegTooShort { steps: leg_timesteps, hold: cfg.hold_steps });
    }
    let speed = effective_speed(distance, leg_timesteps, cfg.dt, cfg.hold_steps);
    Ok(reward_for_speed(speed, cfg))
}

pub fn reward_for_speed(speed: f64, cfg: &SimConfig) -> f64 {
    (10.0 * speed).min(cfg.reward_exponent_cap).exp()
}

/// Where new leg targets come from.
#[derive(Debug, Clone)]
pub enum TargetSource {
    Random(ChaCha8Rng),
    /// Fixed target list; once exhausted the last target is repeated.
    Scripted { queue: VecDeque<Vec3>, last: Vec3 },
}

impl TargetSource {
    pub fn seeded(seed: u64) -> Self {
        TargetSource::Random(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn scripted(targets: impl IntoIterator<Item = Vec3>, fallback: Vec3) -> Self {
        TargetSource::Scripted { queue: targets.into_iter().collect(), last: fallback }
    }

    pub fn next_target(&mut self, workspace: &Aabb) -> Vec3 {
        match self {
            TargetSource::Random(rng) => sample_target(rng, workspace),
            TargetSource::Scripted { queue, last } => {
                if let Some(t) = queue.pop_front() {
                    *last = t;
                }
                *last
            }
        }
    }
}

/// Initial state of an episode: hovering at the workspace center, first
/// target drawn from `targets`. Returns the state and its first observation.
pub fn reset(cfg: &SimConfig, targets: &mut TargetSource) -> (DroneState, ErrorSignal) {
    let center = cfg.workspace.center();
    let mut state = DroneState::hover(center, center);
    let target = targets.next_target(&cfg.workspace);
    let signal = state.begin_leg(target, cfg);
    (state, signal)
}

/// Advances the environment by one control step.
pub fn step(
    state: &DroneState,
    v_cmd: Vec3,
    cfg: &SimConfig,
    targets: &mut TargetSource,
) -> Result<(DroneState, StepOutcome), SimError> {
    if !v_cmd.is_finite() {
        return Err(SimError::NonFiniteCommand(v_cmd));
    }
    let mut next = state.clone();
    next.episode_timestep += 1;

    if v_cmd.norm() > cfg.max_command_speed {
        let observation = observe(state, cfg);
        let outcome = StepOutcome {
            observation,
            reward: cfg.fault_penalty,
            leg_completed: false,
            episode_done: true,
            truncated: false,
            aborted: true,
            step_pe: observation.pe,
            info: None,
        };
        return Ok((next, outcome));
    }

    let accel = ((v_cmd + cfg.wind) - state.velocity) * (1.0 / cfg.tau_v);
    next.velocity = state.velocity + accel * cfg.dt;
    next.position = state.position + next.velocity * cfg.dt;

    let mut signal = observe(&next, cfg);
    next.commit(&signal);
    let step_pe = signal.pe;

    if step_pe <= cfg.settle_tolerance {
        next.hold_counter += 1;
    } else {
        next.hold_counter = 0;
    }

    let mut reward = cfg.step_penalty;
    let mut info = None;
    let leg_completed = next.hold_counter >= cfg.hold_steps;
    if leg_completed {
        let distance = position_error(next.target, next.start_of_leg);
        let leg_timesteps = next.leg_steps();
        let (speed, leg_reward) = match compute_leg_reward(distance, leg_timesteps, cfg) {
            Ok(r) => (effective_speed(distance, leg_timesteps, cfg.dt, cfg.hold_steps), r),
            // Only reachable when a target is drawn inside the tolerance ball.
            Err(SimError::LegTooShort { .. }) => (0.0, reward_for_speed(0.0, cfg)),
            Err(e) => return Err(e),
        };
        reward = leg_reward;
        info = Some(LegInfo {
            leg_index: next.leg_index,
            start: next.start_of_leg,
            target: next.target,
            distance,
            leg_timesteps,
            effective_speed: speed,
            final_ipe: signal.ipe,
            final_pe: step_pe,
        });
        let target = targets.next_target(&cfg.workspace);
        next.leg_index += 1;
        signal = next.begin_leg(target, cfg);
    }

    let truncated = next.episode_timestep >= cfg.episode_cap;
    let outcome = StepOutcome {
        observation: signal,
        reward,
        leg_completed,
        episode_done: truncated,
        truncated,
        aborted: false,
        step_pe,
        info,
    };
    Ok((next, outcome))
}

/// Owning wrapper around [`step`] for rollout loops.
#[derive(Debug, Clone)]
pub struct DroneEnv {
    cfg: SimConfig,
    targets: TargetSource,
    state: DroneState,
    signal: ErrorSignal,
    episodes_started: u64,
}

impl DroneEnv {
    /// Random targets drawn from a stream seeded by `cfg.seed`.
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let targets = TargetSource::seeded(cfg.seed);
        Self::with_targets(cfg, targets)
    }

    pub fn with_targets(cfg: SimConfig, mut targets: TargetSource) -> Result<Self, SimError> {
        cfg.validate()?;
        let (state, signal) = reset(&cfg, &mut targets);
        Ok(Self { cfg, targets, state, signal, episodes_started: 1 })
    }

    /// Hovering at `position` with a leg towards `target`; further targets
    /// come only from [`DroneEnv::retarget`] (the last one is repeated).
    pub fn starting_at(cfg: SimConfig, position: Vec3, target: Vec3) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut state = DroneState::hover(position, position);
        let signal = state.begin_leg(target, &cfg);
        let targets = TargetSource::scripted([], target);
        Ok(Self { cfg, targets, state, signal, episodes_started: 1 })
    }

    /// Starts a new leg from the current position towards `target`.
    pub fn retarget(&mut self, target: Vec3) -> ErrorSignal {
        self.state.leg_index += 1;
        self.signal = self.state.begin_leg(target, &self.cfg);
        if let TargetSource::Scripted { last, .. } = &mut self.targets {
            *last = target;
        }
        self.signal
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn state(&self) -> &DroneState {
        &self.state
    }

    pub fn observation(&self) -> ErrorSignal {
        self.signal
    }

    pub fn episodes_started(&self) -> u64 {
        self.episodes_started
    }

    /// Starts a new episode; the target stream continues where it left off.
    pub fn reset(&mut self) -> ErrorSignal {
        let (state, signal) = reset(&self.cfg, &mut self.targets);
        self.state = state;
        self.signal = signal;
        self.episodes_started += 1;
        signal
    }

    pub fn step(&mut self, v_cmd: Vec3) -> Result<StepOutcome, SimError> {
        let (next, outcome) = step(&self.state, v_cmd, &self.cfg, &mut self.targets)?;
        self.state = next;
        self.signal = outcome.observation;
        Ok(outcome)
    }
}
