//! Hand-scripted legs with hand-computed metric values.
//!
//! Targets sit at the origin and the drone moves along -x, so the logged
//! error at position (-e, 0, 0) is exactly `e`.

use airpid::metrics::{leg_metrics, LegMetrics, LegView, MetricParams};
use airpid::simenv::position_error;
use airpid::Vec3;

const P: MetricParams = MetricParams { dt: 0.04, tolerance: 0.1, hold_steps: 50 };

fn on_axis(errors: &[f64]) -> Vec<Vec3> {
    errors.iter().map(|&e| Vec3::new(-e, 0.0, 0.0)).collect()
}

fn metrics(start: Vec3, target: Vec3, positions: &[Vec3]) -> LegMetrics {
    let pe: Vec<f64> = positions.iter().map(|&p| position_error(target, p)).collect();
    leg_metrics(&LegView { start, target, positions, pe: &pe }, &P)
}

fn approach(from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| from + (to - from) * i as f64 / steps as f64).collect()
}

const START: Vec3 = Vec3::new(-4.0, 0.0, 0.0);

#[test]
fn never_reaches_tolerance() {
    let m = metrics(START, Vec3::ZERO, &on_axis(&approach(4.0, 0.5, 300)));
    assert_eq!(m.effective_speed, 0.0);
    assert_eq!(m.settling_time, None);
    assert_eq!(m.overshoot, None);
}

#[test]
fn reaches_at_step_100_and_holds() {
    let mut e = approach(4.0, 0.14, 100);
    e.extend([0.05; 50]);
    let m = metrics(START, Vec3::ZERO, &on_axis(&e));
    // 4 m over 0.04 s * (150 - 50)
    assert_eq!(m.effective_speed, 1.0);
    assert_eq!(m.settling_time, Some(4.0));
    assert_eq!(m.overshoot, None);
    assert_eq!(m.final_error, 0.05);
}

#[test]
fn inside_tolerance_from_the_first_step() {
    let m = metrics(START, Vec3::ZERO, &on_axis(&[0.05; 80]));
    assert_eq!(m.settling_time, Some(0.0));
}

#[test]
fn brief_dip_then_final_entry() {
    let mut e = vec![1.0; 100];
    e.extend([0.05; 10]);
    e.extend([1.0; 90]);
    e.extend([0.05; 60]);
    let m = metrics(START, Vec3::ZERO, &on_axis(&e));
    assert_eq!(m.settling_time, Some(8.0));
    // settled at 200 -> 4 m / (0.04 * 200)
    assert_eq!(m.effective_speed, 0.5);
}

#[test]
fn hold_window_one_step_short() {
    let mut e = vec![1.0; 20];
    e.extend([0.05; 49]);
    e.push(0.2);
    e.extend([0.05; 49]);
    let m = metrics(START, Vec3::ZERO, &on_axis(&e));
    assert_eq!(m.settling_time, None);
    assert_eq!(m.effective_speed, 0.0);
}

#[test]
fn boundary_error_counts_as_inside() {
    let mut e = vec![1.0; 25];
    e.extend([0.1; 50]);
    let m = metrics(START, Vec3::ZERO, &on_axis(&e));
    assert_eq!(m.settling_time, Some(1.0));
    assert_eq!(m.effective_speed, 4.0);
}

#[test]
fn monotone_approach_stopping_on_target() {
    let mut e = approach(4.0, 0.0, 100);
    e.extend([0.0; 60]);
    let m = metrics(START, Vec3::ZERO, &on_axis(&e));
    assert_eq!(m.overshoot, None);
    assert!(m.settling_time.is_some());
}

#[test]
fn pass_through_peaking_at_0_19() {
    let mut xs: Vec<f64> = approach(-4.0, 0.0, 100);
    xs.extend([0.05, 0.12, 0.19, 0.15, 0.08, 0.02]);
    xs.extend([0.0; 50]);
    let positions: Vec<Vec3> = xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
    let m = metrics(START, Vec3::ZERO, &positions);
    assert_eq!(m.overshoot, Some(0.19));
}

#[test]
fn lateral_deviation_is_not_overshoot() {
    // sideways wander around the target without crossing the plane through it
    let mut positions: Vec<Vec3> = approach(-4.0, -0.5, 50).iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
    positions.extend((0..60).map(|i| Vec3::new(0.0, 0.5 - i as f64 / 100.0, 0.25)));
    let m = metrics(START, Vec3::ZERO, &positions);
    assert_eq!(m.overshoot, None);
}

#[test]
fn zero_length_leg() {
    let m = metrics(Vec3::ZERO, Vec3::ZERO, &on_axis(&[0.0; 60]));
    assert_eq!(m.effective_speed, 0.0);
    assert_eq!(m.overshoot, None);
    assert_eq!(m.settling_time, Some(0.0));
}

#[test]
fn metrics_survive_rigid_translation() {
    let mut xs: Vec<f64> = approach(-4.0, 0.0, 100);
    xs.extend([0.05, 0.19, 0.08]);
    xs.extend([0.0; 50]);
    let base: Vec<Vec3> = xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
    let a = metrics(START, Vec3::ZERO, &base);
    let shift = Vec3::new(3.0, -2.0, 1.5);
    let moved: Vec<Vec3> = base.iter().map(|&p| p + shift).collect();
    let b = metrics(START + shift, shift, &moved);
    assert_eq!(a.settling_time, b.settling_time);
    assert!((a.effective_speed - b.effective_speed).abs() < 1e-12);
    assert!((a.overshoot.unwrap() - b.overshoot.unwrap()).abs() < 1e-12);
}
