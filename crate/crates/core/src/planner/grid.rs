use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::vec3::{Aabb, Vec3};

/// Integer voxel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Voxel {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Voxel {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    /// True when the voxels differ by at most one step on every axis and are
    /// not equal.
    pub fn is_adjacent(self, o: Voxel) -> bool {
        self != o && (self.x - o.x).abs() <= 1 && (self.y - o.y).abs() <= 1 && (self.z - o.z).abs() <= 1
    }
}

/// Obstacles as axis-aligned boxes in meters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub boxes: Vec<Aabb>,
}

/// Drone footprint of 355 x 355 x 125 mm as half extents.
pub const DEFAULT_HALF_EXTENT: Vec3 = Vec3::new(0.1775, 0.1775, 0.0625);

/// Occupancy grid with obstacles already inflated by the drone's half extent.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
    blocked: Vec<bool>,
}

// Overlaps thinner than this count as touching, not intersecting.
const TOUCH_EPS: f64 = 1e-9;

impl VoxelGrid {
    /// Grid of free voxels with the given shape, for synthetic tests.
    pub fn empty(dims: [usize; 3]) -> Self {
        Self { origin: Vec3::ZERO, resolution: 1.0, dims, blocked: vec![false; dims[0] * dims[1] * dims[2]] }
    }

    pub fn from_blocked(dims: [usize; 3], blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), dims[0] * dims[1] * dims[2]);
        Self { origin: Vec3::ZERO, resolution: 1.0, dims, blocked }
    }

    pub fn in_bounds(&self, v: Voxel) -> bool {
        v.x >= 0
            && v.y >= 0
            && v.z >= 0
            && (v.x as usize) < self.dims[0]
            && (v.y as usize) < self.dims[1]
            && (v.z as usize) < self.dims[2]
    }

    pub fn index(&self, v: Voxel) -> Option<usize> {
        self.in_bounds(v)
            .then(|| (v.x as usize * self.dims[1] + v.y as usize) * self.dims[2] + v.z as usize)
    }

    pub fn voxel_at(&self, idx: usize) -> Voxel {
        let z = idx % self.dims[2];
        let y = (idx / self.dims[2]) % self.dims[1];
        let x = idx / (self.dims[1] * self.dims[2]);
        Voxel::new(x as i32, y as i32, z as i32)
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    /// Out-of-range voxels count as blocked.
    pub fn is_blocked(&self, v: Voxel) -> bool {
        self.index(v).is_none_or(|i| self.blocked[i])
    }

    pub fn set_blocked(&mut self, v: Voxel, blocked: bool) {
        if let Some(i) = self.index(v) {
            self.blocked[i] = blocked;
        }
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn center(&self, v: Voxel) -> Vec3 {
        let r = self.resolution;
        self.origin + Vec3::new((v.x as f64 + 0.5) * r, (v.y as f64 + 0.5) * r, (v.z as f64 + 0.5) * r)
    }

    /// Voxel containing a metric point, if inside the grid.
    pub fn locate(&self, p: Vec3) -> Option<Voxel> {
        let rel = (p - self.origin) * (1.0 / self.resolution);
        let v = Voxel::new(rel.x.floor() as i32, rel.y.floor() as i32, rel.z.floor() as i32);
        self.in_bounds(v).then_some(v)
    }
}

/// Builds the planning grid over `workspace`.
///
/// A voxel is blocked when its cube overlaps (with positive volume) any
/// obstacle grown by `half_extent` on each side; equivalently, when its center
/// lies strictly inside the obstacle grown by `half_extent + resolution / 2`.
/// Voxels whose center falls outside the workspace are blocked too.
pub fn build_grid(
    obstacles: &ObstacleSet,
    workspace: &Aabb,
    resolution: f64,
    half_extent: Vec3,
) -> Result<VoxelGrid, PlanError> {
    if !workspace.is_nondegenerate() {
        return Err(PlanError::InvalidGrid("workspace box is degenerate".into()));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(PlanError::InvalidGrid("resolution must be > 0".into()));
    }
    let ext = workspace.extent();
    if resolution > ext.x || resolution > ext.y || resolution > ext.z {
        return Err(PlanError::InvalidGrid(format!("resolution {resolution} m exceeds the workspace extent")));
    }
    if !(half_extent.is_finite() && half_extent.x >= 0.0 && half_extent.y >= 0.0 && half_extent.z >= 0.0) {
        return Err(PlanError::InvalidGrid("half extent must be non-negative".into()));
    }
    for b in &obstacles.boxes {
        if !b.is_nondegenerate() {
            return Err(PlanError::InvalidGrid(format!("degenerate obstacle box {b:?}")));
        }
    }
    let cells = |e: f64| ((e / resolution) - TOUCH_EPS).ceil().max(1.0) as usize;
    let dims = [cells(ext.x), cells(ext.y), cells(ext.z)];
    let mut grid = VoxelGrid {
        origin: workspace.min,
        resolution,
        dims,
        blocked: vec![false; dims[0] * dims[1] * dims[2]],
    };
    let half = resolution * 0.5;
    let grown: Vec<Aabb> = obstacles
        .boxes
        .iter()
        .map(|b| Aabb::new(b.min - half_extent, b.max + half_extent))
        .collect();
    for idx in 0..grid.blocked.len() {
        let c = grid.center(grid.voxel_at(idx));
        let outside = c.x > workspace.max.x || c.y > workspace.max.y || c.z > workspace.max.z;
        let hit = grown.iter().any(|g| {
            let overlap = |lo: f64, hi: f64, cc: f64| (hi - (cc - half)) > TOUCH_EPS && ((cc + half) - lo) > TOUCH_EPS;
            overlap(g.min.x, g.max.x, c.x) && overlap(g.min.y, g.max.y, c.y) && overlap(g.min.z, g.max.z, c.z)
        });
        grid.blocked[idx] = outside || hit;
    }
    Ok(grid)
}
