//! A* over the 26-connected voxel lattice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::grid::{Voxel, VoxelGrid};
use super::PlanError;
use crate::vec3::Vec3;

/// Edge-cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// Moves cost their Euclidean length (1, √2, √3); Euclidean heuristic.
    #[default]
    Euclidean,
    /// Every move costs 1; Euclidean heuristic scaled by 1/√3 so it stays
    /// admissible.
    Uniform,
}

/// Which voxels a move must find free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clearance {
    /// Only the destination voxel.
    #[default]
    Destination,
    /// The destination and every voxel a diagonal move sweeps past, so
    /// moves never cut a blocked corner.
    NoCornerCutting,
}

fn move_is_clear(grid: &VoxelGrid, from: Voxel, (dx, dy, dz): (i32, i32, i32), clearance: Clearance) -> bool {
    if grid.is_blocked(from.offset(dx, dy, dz)) {
        return false;
    }
    match clearance {
        Clearance::Destination => true,
        Clearance::NoCornerCutting => {
            // every partial move (a non-empty proper subset of the changed axes)
            for mask in 1..7u8 {
                let sx = if mask & 1 != 0 { dx } else { 0 };
                let sy = if mask & 2 != 0 { dy } else { 0 };
                let sz = if mask & 4 != 0 { dz } else { 0 };
                if (sx, sy, sz) != (0, 0, 0) && (sx, sy, sz) != (dx, dy, dz) && grid.is_blocked(from.offset(sx, sy, sz)) {
                    return false;
                }
            }
            true
        }
    }
}

/// Path cost kept as counts of axis, face-diagonal and space-diagonal moves,
/// so equal-length paths always produce bit-identical costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct PathCost {
    pub moves: [u32; 3],
}

impl PathCost {
    pub fn add_move(self, axes_changed: usize) -> Self {
        let mut moves = self.moves;
        moves[axes_changed - 1] += 1;
        Self { moves }
    }

    pub fn value(&self, mode: CostMode) -> f64 {
        let [a, f, s] = self.moves.map(f64::from);
        match mode {
            CostMode::Euclidean => a + f * std::f64::consts::SQRT_2 + s * 3f64.sqrt(),
            CostMode::Uniform => a + f + s,
        }
    }
}

pub fn heuristic(a: Voxel, b: Voxel, mode: CostMode) -> f64 {
    let dx = f64::from(a.x - b.x);
    let dy = f64::from(a.y - b.y);
    let dz = f64::from(a.z - b.z);
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    match mode {
        CostMode::Euclidean => d,
        CostMode::Uniform => d / 3f64.sqrt(),
    }
}

/// The 26 neighbor offsets in a fixed order.
pub fn neighbor_offsets() -> impl Iterator<Item = (i32, i32, i32)> {
    (-1..=1).flat_map(|dx| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dz| (dx, dy, dz))))
        .filter(|&o| o != (0, 0, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub voxels: Vec<Voxel>,
    /// Voxel centers in meters.
    pub path: Vec<Vec3>,
    pub cost: f64,
    pub path_cost: PathCost,
    pub expanded: usize,
    /// f-value of each expanded node, in expansion order.
    pub expansion_f: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    f: f64,
    h: f64,
    seq: u64,
    node: usize,
    g: PathCost,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // BinaryHeap is a max-heap: invert so the smallest (f, h, seq) pops first.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.h.total_cmp(&self.h)).then(o.seq.cmp(&self.seq))
    }
}

/// Optimal path from `start` to `goal`. Ties are broken by lowest f, then
/// lowest h, then earliest insertion. Only the destination voxel of a move
/// must be free.
pub fn a_star(start: Voxel, goal: Voxel, grid: &VoxelGrid, mode: CostMode) -> Result<PlanResult, PlanError> {
    a_star_with(start, goal, grid, mode, Clearance::Destination)
}

/// [`a_star`] with an explicit move clearance rule.
pub fn a_star_with(start: Voxel, goal: Voxel, grid: &VoxelGrid, mode: CostMode, clearance: Clearance) -> Result<PlanResult, PlanError> {
    for (which, v) in [("start", start), ("goal", goal)] {
        if !grid.in_bounds(v) {
            return Err(PlanError::OutOfRange { which, voxel: v });
        }
        if grid.is_blocked(v) {
            return Err(PlanError::BlockedEndpoint { which, voxel: v });
        }
    }
    let n = grid.len();
    let start_i = grid.index(start).expect("checked in bounds");
    let goal_i = grid.index(goal).expect("checked in bounds");

    let mut g_score: Vec<Option<PathCost>> = vec![None; n];
    let mut came_from: Vec<Option<usize>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    let mut expansion_f = Vec::new();

    g_score[start_i] = Some(PathCost::default());
    let h0 = heuristic(start, goal, mode);
    open.push(Entry { f: h0, h: h0, seq, node: start_i, g: PathCost::default() });

    while let Some(cur) = open.pop() {
        if closed[cur.node] || g_score[cur.node] != Some(cur.g) {
            continue;
        }
        closed[cur.node] = true;
        expansion_f.push(cur.f);
        if cur.node == goal_i {
            let voxels = reconstruct_path(&came_from, grid, cur.node)?;
            return Ok(PlanResult {
                path: voxels.iter().map(|&v| grid.center(v)).collect(),
                voxels,
                cost: cur.g.value(mode),
                path_cost: cur.g,
                expanded: expansion_f.len(),
                expansion_f,
            });
        }
        let here = grid.voxel_at(cur.node);
        for (dx, dy, dz) in neighbor_offsets() {
            let nb = here.offset(dx, dy, dz);
            let Some(ni) = grid.index(nb) else { continue };
            if closed[ni] || !move_is_clear(grid, here, (dx, dy, dz), clearance) {
                continue;
            }
            let axes = (dx != 0) as usize + (dy != 0) as usize + (dz != 0) as usize;
            let tentative = cur.g.add_move(axes);
            let better = match g_score[ni] {
                None => true,
                Some(old) => tentative.value(mode) < old.value(mode),
            };
            if better {
                g_score[ni] = Some(tentative);
                came_from[ni] = Some(cur.node);
                let h = heuristic(nb, goal, mode);
                seq += 1;
                open.push(Entry { f: tentative.value(mode) + h, h, seq, node: ni, g: tentative });
            }
        }
    }
    Err(PlanError::NoPath)
}

/// Walks parent links back from `current` and returns the start-to-goal voxel
/// sequence.
pub fn reconstruct_path(came_from: &[Option<usize>], grid: &VoxelGrid, current: usize) -> Result<Vec<Voxel>, PlanError> {
    let mut out = vec![grid.voxel_at(current)];
    let mut node = current;
    while let Some(parent) = came_from.get(node).copied().flatten() {
        if out.len() > came_from.len() {
            return Err(PlanError::BrokenParentChain);
        }
        let pv = grid.voxel_at(parent);
        if !pv.is_adjacent(*out.last().expect("non-empty")) {
            return Err(PlanError::BrokenParentChain);
        }
        out.push(pv);
        node = parent;
    }
    out.reverse();
    Ok(out)
}
