//! Closed-loop episodes: controller + environment + per-leg bookkeeping.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{act, ControllerError, ControllerMode, GainBounds, Gains, Sampling};
use crate::exec::Exec;
use crate::metrics::{leg_metrics, LegMeta, LegMetrics, LegView, MetricParams, TrajectoryLog, TrajectoryStep};
use crate::planner::Setpoint;
use crate::rng::derive_seed;
use crate::simenv::{DroneEnv, DroneState, SimConfig, SimError, StepOutcome, TargetSource};
use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegStatus {
    Completed,
    /// Cut off by the episode cap.
    Truncated,
    /// Ended by the command-speed guard.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub meta: LegMeta,
    pub metrics: LegMetrics,
    pub status: LegStatus,
    pub steps: u32,
    /// Error integral at the leg's last step.
    pub final_ipe: f64,
}

struct OpenLeg {
    meta: LegMeta,
    positions: Vec<Vec3>,
    pe: Vec<f64>,
    last_ipe: f64,
}

/// Accumulates the samples of the leg in flight and turns them into metrics
/// when the leg closes.
pub struct LegTracker {
    params: MetricParams,
    open: Option<OpenLeg>,
    next_id: u32,
}

impl LegTracker {
    pub fn new(params: MetricParams) -> Self {
        Self { params, open: None, next_id: 0 }
    }

    pub fn current_leg_id(&self) -> Option<u32> {
        self.open.as_ref().map(|l| l.meta.leg_id)
    }

    /// Opens a leg for the state's current target.
    pub fn begin(&mut self, state: &DroneState) {
        let meta = LegMeta {
            leg_id: self.next_id,
            start: state.start_of_leg,
            target: state.target,
            start_timestep: state.leg_start_timestep,
            end_timestep: state.leg_start_timestep,
            completed: false,
        };
        self.next_id += 1;
        self.open = Some(OpenLeg { meta, positions: Vec::new(), pe: Vec::new(), last_ipe: state.integral_pe });
    }

    pub fn record(&mut self, position: Vec3, pe: f64, ipe: f64, timestep: u32) {
        if let Some(leg) = &mut self.open {
            leg.positions.push(position);
            leg.pe.push(pe);
            leg.last_ipe = ipe;
            leg.meta.end_timestep = timestep;
        }
    }

    /// Closes the open leg; legs without samples are dropped.
    pub fn close(&mut self, status: LegStatus) -> Option<LegRecord> {
        let mut leg = self.open.take()?;
        if leg.pe.is_empty() {
            return None;
        }
        leg.meta.completed = status == LegStatus::Completed;
        let view = LegView { start: leg.meta.start, target: leg.meta.target, positions: &leg.positions, pe: &leg.pe };
        Some(LegRecord {
            meta: leg.meta,
            metrics: leg_metrics(&view, &self.params),
            status,
            steps: leg.pe.len() as u32,
            final_ipe: leg.last_ipe,
        })
    }

    /// Feeds one environment transition. `before` is the state the step
    /// started from, `after` the state it produced. Returns legs that closed.
    pub fn observe_step(&mut self, before: &DroneState, after: &DroneState, out: &StepOutcome) -> Vec<LegRecord> {
        let mut closed = Vec::new();
        let ipe = match &out.info {
            Some(info) => info.final_ipe,
            None if out.aborted => before.integral_pe,
            None => after.integral_pe,
        };
        self.record(after.position, out.step_pe, ipe, after.episode_timestep);
        if out.leg_completed {
            closed.extend(self.close(LegStatus::Completed));
            self.begin(after);
        }
        if out.episode_done {
            let status = if out.aborted { LegStatus::Aborted } else { LegStatus::Truncated };
            closed.extend(self.close(status));
        }
        closed
    }
}

/// Everything recorded during one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub log: TrajectoryLog,
    pub legs: Vec<LegRecord>,
}

/// Runs one deterministic episode with targets drawn from `seed`.
pub fn run_episode(mode: &ControllerMode, cfg: &SimConfig, bounds: &GainBounds, seed: u64) -> Result<EpisodeResult, EpisodeError> {
    let mut env = DroneEnv::with_targets(cfg.clone(), TargetSource::seeded(seed))?;
    let mut tracker = LegTracker::new(MetricParams::from(cfg));
    tracker.begin(env.state());
    let mut log = TrajectoryLog { dt: cfg.dt, ..Default::default() };
    let mut legs = Vec::new();
    loop {
        let before = env.state().clone();
        let signal = env.observation();
        let action = act::<rand_chacha::ChaCha8Rng>(mode, &signal, before.target, before.position, bounds, Sampling::Deterministic)?;
        let out = env.step(action.v_cmd)?;
        let after = env.state();
        log.steps.push(TrajectoryStep {
            t: f64::from(after.episode_timestep) * cfg.dt,
            position: after.position,
            velocity: after.velocity,
            gains: action.gains,
            command: action.v_cmd,
            pe: out.step_pe,
            leg_id: tracker.current_leg_id().unwrap_or(0),
        });
        let closed = tracker.observe_step(&before, after, &out);
        legs.extend(closed);
        if out.episode_done {
            break;
        }
    }
    log.legs = legs.iter().map(|l| l.meta).collect();
    Ok(EpisodeResult { seed, log, legs })
}

/// Runs `episodes` evaluation episodes, episode `k` seeded with
/// `derive_seed(master_seed, k)`. Output order follows `k`.
pub fn evaluate(
    mode: &ControllerMode,
    cfg: &SimConfig,
    bounds: &GainBounds,
    episodes: usize,
    master_seed: u64,
    exec: Exec,
) -> Result<Vec<EpisodeResult>, EpisodeError> {
    exec.map_indexed(episodes, |k| run_episode(mode, cfg, bounds, derive_seed(master_seed, k as u64)))
        .into_iter()
        .collect()
}

/// How a leg counts towards the evaluation success rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegOutcome {
    Success,
    Failure,
    /// Cut off by the episode cap before `leg_timeout` steps: no verdict.
    Censored,
}

pub fn classify_leg(leg: &LegRecord, tolerance: f64, leg_timeout: u32) -> LegOutcome {
    match leg.status {
        LegStatus::Completed if leg.metrics.final_error <= tolerance => LegOutcome::Success,
        LegStatus::Completed | LegStatus::Aborted => LegOutcome::Failure,
        LegStatus::Truncated if leg.steps >= leg_timeout => LegOutcome::Failure,
        LegStatus::Truncated => LegOutcome::Censored,
    }
}

/// Fraction of judged legs that succeeded; `None` when every leg was censored.
pub fn success_rate<'a>(legs: impl IntoIterator<Item = &'a LegRecord>, tolerance: f64, leg_timeout: u32) -> Option<f64> {
    let (mut ok, mut judged) = (0usize, 0usize);
    for leg in legs {
        match classify_leg(leg, tolerance, leg_timeout) {
            LegOutcome::Success => {
                ok += 1;
                judged += 1;
            }
            LegOutcome::Failure => judged += 1,
            LegOutcome::Censored => {}
        }
    }
    (judged > 0).then(|| ok as f64 / judged as f64)
}

/// Metrics of the legs that received a verdict (censored legs dropped).
pub fn judged_metrics<'a>(legs: impl IntoIterator<Item = &'a LegRecord>, tolerance: f64, leg_timeout: u32) -> Vec<LegMetrics> {
    legs.into_iter()
        .filter(|l| classify_leg(l, tolerance, leg_timeout) != LegOutcome::Censored)
        .map(|l| l.metrics)
        .collect()
}

/// Probe signal for steady-state gain extraction: at the settle tolerance,
/// not moving, with the median error integral observed at the end of the
/// completed legs of `episode`.
pub fn steady_state_probe(episode: &EpisodeResult, tolerance: f64) -> crate::simenv::ErrorSignal {
    let ipes: Vec<f64> = episode
        .legs
        .iter()
        .filter(|l| l.status == LegStatus::Completed)
        .map(|l| l.final_ipe)
        .collect();
    let ipe = if ipes.is_empty() { 0.0 } else { crate::metrics::median(&ipes) };
    crate::simenv::ErrorSignal::new(tolerance, 0.0, ipe)
}

/// Tracking summary for a timed setpoint schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowReport {
    pub log: TrajectoryLog,
    /// Error against the final waypoint at the end of the run.
    pub final_error: f64,
    /// Time at which the drone first held the final waypoint for the hold
    /// window, if it did.
    pub arrival_time: Option<f64>,
    /// Mean error against the active setpoint.
    pub mean_tracking_error: f64,
}

/// Flies a setpoint schedule: the active target switches to setpoint `k` at
/// time `t_k`. Runs until the final waypoint is held for the hold window or
/// `extra_time` seconds pass after the last setpoint.
pub fn follow_schedule(
    mode: &ControllerMode,
    cfg: &SimConfig,
    bounds: &GainBounds,
    schedule: &[Setpoint],
    extra_time: f64,
) -> Result<FollowReport, EpisodeError> {
    let first = schedule.first().map(|s| s.position).unwrap_or(Vec3::ZERO);
    let last = schedule.last().map(|s| s.position).unwrap_or(first);
    let t_end = schedule.last().map(|s| s.t).unwrap_or(0.0) + extra_time;
    let max_steps = (t_end / cfg.dt).ceil() as u32 + 1;
    // leg completion is driven by the schedule, not by the hold rule
    let follow_cfg = SimConfig { episode_cap: max_steps + 2, hold_steps: max_steps + 1, ..cfg.clone() };
    let mut env = DroneEnv::starting_at(follow_cfg, first, first)?;
    let mut log = TrajectoryLog { dt: cfg.dt, ..Default::default() };
    let mut active = 0usize;
    let mut hold = 0u32;
    let mut arrival = None;
    let mut err_sum = 0.0;
    log.legs.push(LegMeta {
        leg_id: 0,
        start: first,
        target: first,
        start_timestep: 0,
        end_timestep: 0,
        completed: false,
    });
    for step in 0..max_steps {
        let t = f64::from(step) * cfg.dt;
        while active + 1 < schedule.len() && schedule[active + 1].t <= t + 1e-12 {
            active += 1;
            env.retarget(schedule[active].position);
            log.legs.push(LegMeta {
                leg_id: active as u32,
                start: env.state().start_of_leg,
                target: env.state().target,
                start_timestep: step,
                end_timestep: step,
                completed: false,
            });
        }
        let state = env.state().clone();
        let a = act::<rand_chacha::ChaCha8Rng>(mode, &env.observation(), state.target, state.position, bounds, Sampling::Deterministic)?;
        let out = env.step(a.v_cmd)?;
        let s = env.state();
        err_sum += out.step_pe;
        log.steps.push(TrajectoryStep {
            t: f64::from(s.episode_timestep) * cfg.dt,
            position: s.position,
            velocity: s.velocity,
            gains: a.gains,
            command: a.v_cmd,
            pe: out.step_pe,
            leg_id: active as u32,
        });
        if let Some(meta) = log.legs.last_mut() {
            meta.end_timestep = s.episode_timestep;
        }
        if active + 1 == schedule.len() && crate::simenv::position_error(last, s.position) <= cfg.settle_tolerance {
            hold += 1;
            if hold >= cfg.hold_steps {
                arrival = Some(f64::from(s.episode_timestep) * cfg.dt);
                if let Some(meta) = log.legs.last_mut() {
                    meta.completed = true;
                }
                break;
            }
        } else {
            hold = 0;
        }
    }
    let final_error = crate::simenv::position_error(last, env.state().position);
    let n = log.steps.len().max(1) as f64;
    Ok(FollowReport { log, final_error, arrival_time: arrival, mean_tracking_error: err_sum / n })
}

/// Convenience: stochastic or deterministic action selection for callers
/// holding an rng.
pub fn sampling_for<R: Rng + ?Sized>(rng: Option<&mut R>) -> Sampling<'_, R> {
    match rng {
        Some(r) => Sampling::Stochastic(r),
        None => Sampling::Deterministic,
    }
}

/// Gains observed over time for the first leg(s) of an episode, as
/// `(t, pe, gains)` triples.
pub fn gain_trace(log: &TrajectoryLog) -> Vec<(f64, u32, f64, Gains)> {
    log.steps.iter().map(|s| (s.t, s.leg_id, s.pe, s.gains)).collect()
}
