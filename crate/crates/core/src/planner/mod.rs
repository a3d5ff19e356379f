//! 3D path planning on an inflated voxel grid, plus timed setpoint emission.

mod astar;
mod grid;

pub use astar::{a_star, a_star_with, heuristic, Clearance, neighbor_offsets, reconstruct_path, CostMode, PathCost, PlanResult};
pub use grid::{build_grid, ObstacleSet, Voxel, VoxelGrid, DEFAULT_HALF_EXTENT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{which} voxel {voxel:?} is outside the grid")]
    OutOfRange { which: &'static str, voxel: Voxel },
    #[error("{which} voxel {voxel:?} is blocked")]
    BlockedEndpoint { which: &'static str, voxel: Voxel },
    #[error("no path between start and goal")]
    NoPath,
    #[error("parent chain is broken")]
    BrokenParentChain,
    #[error("setpoint rate must be > 0 Hz, got {0}")]
    BadRate(f64),
    #[error("cannot schedule an empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub t: f64,
    pub position: Vec3,
}

/// One setpoint per waypoint, spaced `1 / rate_hz` seconds apart from t = 0.
pub fn emit_setpoints(path: &[Vec3], rate_hz: f64) -> Result<Vec<Setpoint>, PlanError> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(PlanError::BadRate(rate_hz));
    }
    if path.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    Ok(path
        .iter()
        .enumerate()
        .map(|(k, &position)| Setpoint { t: k as f64 / rate_hz, position })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_spacing() {
        let p = Vec3::new(1.0, 2.0, 1.0);
        let one = emit_setpoints(&[p], 1.0).unwrap();
        assert_eq!(one, vec![Setpoint { t: 0.0, position: p }]);

        let five = emit_setpoints(&[p; 5], 1.0).unwrap();
        let ts: Vec<f64> = five.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.0, 3.0, 4.0]);

        let fast = emit_setpoints(&[p; 3], 2.0).unwrap();
        assert_eq!(fast[1].t - fast[0].t, 0.5);

        assert_eq!(emit_setpoints(&[], 1.0), Err(PlanError::EmptyPath));
        assert_eq!(emit_setpoints(&[p], 0.0), Err(PlanError::BadRate(0.0)));
    }
}
