//! Leg-level evaluation metrics: effective speed, settling time, overshoot.
//!
//! Sentinel conventions:
//! - a leg whose hold window never completes has effective speed 0 m/s;
//! - settling time is `None` when no hold window exists ("not settled");
//! - overshoot is `None` when the drone never passes the target along the
//!   start-to-target axis ("undefined").

use serde::{Deserialize, Serialize};

use crate::controller::Gains;
use crate::simenv::{self, position_error};
use crate::vec3::Vec3;

/// One logged control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub gains: Gains,
    pub command: Vec3,
    pub pe: f64,
    pub leg_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegMeta {
    pub leg_id: u32,
    pub start: Vec3,
    pub target: Vec3,
    /// Episode timestep at which the leg began.
    pub start_timestep: u32,
    /// Episode timestep of the leg's last step.
    pub end_timestep: u32,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub steps: Vec<TrajectoryStep>,
    pub legs: Vec<LegMeta>,
}

/// Borrowed view of one leg's samples.
#[derive(Debug, Clone, Copy)]
pub struct LegView<'a> {
    pub start: Vec3,
    pub target: Vec3,
    pub positions: &'a [Vec3],
    pub pe: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub dt: f64,
    pub tolerance: f64,
    pub hold_steps: u32,
}

impl From<&simenv::SimConfig> for MetricParams {
    fn from(c: &simenv::SimConfig) -> Self {
        Self { dt: c.dt, tolerance: c.settle_tolerance, hold_steps: c.hold_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegMetrics {
    pub effective_speed: f64,
    pub settling_time: Option<f64>,
    pub overshoot: Option<f64>,
    pub final_error: f64,
}

/// First index `s` such that `pe[s..s + hold]` are all within tolerance.
pub fn settling_index(pe: &[f64], tolerance: f64, hold_steps: u32) -> Option<usize> {
    let hold = hold_steps as usize;
    let mut run = 0usize;
    for (i, &e) in pe.iter().enumerate() {
        if e <= tolerance {
            run += 1;
            if run >= hold {
                return Some(i + 1 - hold);
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn settling_time(pe: &[f64], tolerance: f64, hold_steps: u32, dt: f64) -> Option<f64> {
    settling_index(pe, tolerance, hold_steps).map(|s| dt * s as f64)
}

/// Leg distance over time-to-stable-arrival; 0 m/s when the hold never
/// completed.
pub fn effective_speed(leg: &LegView<'_>, p: &MetricParams) -> f64 {
    let distance = position_error(leg.target, leg.start);
    match settling_index(leg.pe, p.tolerance, p.hold_steps) {
        Some(s) if s > 0 && distance > 0.0 => {
            simenv::effective_speed(distance, s as u32 + p.hold_steps, p.dt, p.hold_steps)
        }
        _ => 0.0,
    }
}

/// Largest excursion past the target along the start-to-target axis.
pub fn overshoot(positions: &[Vec3], start: Vec3, target: Vec3) -> Option<f64> {
    let axis = target - start;
    let len = axis.norm();
    if len == 0.0 {
        return None;
    }
    let u = axis * (1.0 / len);
    positions
        .iter()
        .map(|&p| (p - target).dot(u))
        .filter(|&proj| proj > 0.0)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

pub fn leg_metrics(leg: &LegView<'_>, p: &MetricParams) -> LegMetrics {
    LegMetrics {
        effective_speed: effective_speed(leg, p),
        settling_time: settling_time(leg.pe, p.tolerance, p.hold_steps, p.dt),
        overshoot: overshoot(leg.positions, leg.start, leg.target),
        final_error: leg.pe.last().copied().unwrap_or_else(|| position_error(leg.target, leg.start)),
    }
}

impl TrajectoryLog {
    /// Positions and errors of the steps tagged with `leg_id`.
    pub fn leg_samples(&self, leg_id: u32) -> (Vec<Vec3>, Vec<f64>) {
        self.steps.iter().filter(|s| s.leg_id == leg_id).map(|s| (s.position, s.pe)).unzip()
    }

    /// Metrics for every leg listed in `legs`, in order.
    pub fn metrics(&self, p: &MetricParams) -> Vec<(LegMeta, LegMetrics)> {
        self.legs
            .iter()
            .map(|meta| {
                let (positions, pe) = self.leg_samples(meta.leg_id);
                let view = LegView { start: meta.start, target: meta.target, positions: &positions, pe: &pe };
                (*meta, leg_metrics(&view, p))
            })
            .collect()
    }

    /// Legs whose logged `pe` differs from the recomputed target distance.
    pub fn integrity_violations(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| match self.legs.iter().find(|l| l.leg_id == s.leg_id) {
                Some(leg) => position_error(leg.target, s.position) != s.pe,
                None => true,
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// How per-leg values are combined across legs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Median,
    Mean,
}

impl Aggregate {
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        match self {
            Aggregate::Mean => Some(values.iter().sum::<f64>() / values.len() as f64),
            Aggregate::Median => Some(median(values)),
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregated view of a set of legs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub legs: usize,
    pub effective_speed: f64,
    /// Over settled legs only.
    pub settling_time: Option<f64>,
    /// Legs with undefined overshoot count as 0 m.
    pub overshoot: f64,
    /// Fraction of legs that never settled.
    pub failure_rate: f64,
}

pub fn summarize(legs: &[LegMetrics], agg: Aggregate) -> Option<MetricSummary> {
    if legs.is_empty() {
        return None;
    }
    let speeds: Vec<f64> = legs.iter().map(|l| l.effective_speed).collect();
    let settled: Vec<f64> = legs.iter().filter_map(|l| l.settling_time).collect();
    let overs: Vec<f64> = legs.iter().map(|l| l.overshoot.unwrap_or(0.0)).collect();
    Some(MetricSummary {
        legs: legs.len(),
        effective_speed: agg.apply(&speeds)?,
        settling_time: agg.apply(&settled),
        overshoot: agg.apply(&overs)?,
        failure_rate: (legs.len() - settled.len()) as f64 / legs.len() as f64,
    })
}

/// Percentage change of `adaptive` relative to `baseline`; `None` when the
/// baseline is zero or either side is missing.
pub fn percent_change(adaptive: Option<f64>, baseline: Option<f64>) -> Option<f64> {
    match (adaptive, baseline) {
        (Some(a), Some(b)) if b != 0.0 => Some(100.0 * (a - b) / b),
        (Some(a), Some(b)) if a == b => Some(0.0),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub adaptive: MetricSummary,
    pub baseline: MetricSummary,
    /// Positive is better.
    pub speed_pct: Option<f64>,
    /// Negative is better.
    pub settling_pct: Option<f64>,
    /// Negative is better.
    pub overshoot_pct: Option<f64>,
}

pub fn improvement_report(adaptive: &[LegMetrics], baseline: &[LegMetrics], agg: Aggregate) -> Option<ImprovementReport> {
    let a = summarize(adaptive, agg)?;
    let b = summarize(baseline, agg)?;
    Some(ImprovementReport {
        adaptive: a,
        baseline: b,
        speed_pct: percent_change(Some(a.effective_speed), Some(b.effective_speed)),
        settling_pct: percent_change(a.settling_time, b.settling_time),
        overshoot_pct: percent_change(Some(a.overshoot), Some(b.overshoot)),
    })
}
