use airpid::planner::{a_star, build_grid, heuristic, neighbor_offsets, CostMode, ObstacleSet, PlanError, Voxel, VoxelGrid};
use airpid::rng::seeded_rng;
use airpid::vec3::{Aabb, Vec3};
use rand::Rng;

const N: usize = 8;

fn random_grid(seed: u64, density: f64) -> VoxelGrid {
    let mut rng = seeded_rng(seed);
    let blocked = (0..N * N * N).map(|_| rng.random::<f64>() < density).collect();
    VoxelGrid::from_blocked([N, N, N], blocked)
}

fn edge_cost(axes: usize, mode: CostMode) -> (u32, u32, u32) {
    match (mode, axes) {
        (_, 1) => (1, 0, 0),
        (_, 2) => (0, 1, 0),
        _ => (0, 0, 1),
    }
}

fn value(c: (u32, u32, u32), mode: CostMode) -> f64 {
    let (a, f, s) = (c.0 as f64, c.1 as f64, c.2 as f64);
    match mode {
        CostMode::Euclidean => a + f * 2f64.sqrt() + s * 3f64.sqrt(),
        CostMode::Uniform => a + f + s,
    }
}

/// Dense O(V^2) Dijkstra from `source` over free voxels; returns the cost
/// value of every voxel (`None` if unreachable).
fn dijkstra(grid: &VoxelGrid, source: Voxel, mode: CostMode) -> Vec<Option<f64>> {
    let n = grid.len();
    let mut dist: Vec<Option<(u32, u32, u32)>> = vec![None; n];
    let mut done = vec![false; n];
    dist[grid.index(source).unwrap()] = Some((0, 0, 0));
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if let (false, Some(d)) = (done[i], dist[i]) {
                let v = value(d, mode);
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
        }
        let Some((u, du)) = best else { break };
        done[u] = true;
        let here = grid.voxel_at(u);
        let cu = dist[u].unwrap();
        for (dx, dy, dz) in neighbor_offsets() {
            let nb = here.offset(dx, dy, dz);
            if grid.is_blocked(nb) {
                continue;
            }
            let ni = grid.index(nb).unwrap();
            let axes = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
            let e = edge_cost(axes, mode);
            let cand = (cu.0 + e.0, cu.1 + e.1, cu.2 + e.2);
            if dist[ni].is_none_or(|old| value(cand, mode) < value(old, mode)) {
                dist[ni] = Some(cand);
            }
        }
        let _ = du;
    }
    dist.into_iter().map(|d| d.map(|c| value(c, mode))).collect()
}

fn free_pair(grid: &VoxelGrid, seed: u64) -> (Voxel, Voxel) {
    let mut rng = seeded_rng(seed ^ 0xABCD);
    let mut pick = || loop {
        let v = Voxel::new(rng.random_range(0..N as i32), rng.random_range(0..N as i32), rng.random_range(0..N as i32));
        if !grid.is_blocked(v) {
            return v;
        }
    };
    (pick(), pick())
}

#[test]
fn matches_dijkstra_on_random_grids() {
    let mut reachable = 0;
    for seed in 0..50 {
        let grid = random_grid(seed, 0.2);
        let (s, g) = free_pair(&grid, seed);
        for mode in [CostMode::Euclidean, CostMode::Uniform] {
            let oracle = dijkstra(&grid, s, mode)[grid.index(g).unwrap()];
            match (a_star(s, g, &grid, mode), oracle) {
                (Ok(r), Some(c)) => {
                    assert_eq!(r.cost, c, "seed {seed} {mode:?}");
                    reachable += 1;
                }
                (Err(PlanError::NoPath), None) => {}
                (other, o) => panic!("seed {seed} {mode:?}: a* {other:?} vs oracle {o:?}"),
            }
        }
    }
    assert!(reachable > 80);
}

#[test]
fn paths_are_safe_and_connected() {
    for seed in 0..50 {
        let grid = random_grid(seed, 0.2);
        let (s, g) = free_pair(&grid, seed);
        for mode in [CostMode::Euclidean, CostMode::Uniform] {
            let Ok(r) = a_star(s, g, &grid, mode) else { continue };
            assert_eq!(r.voxels.first(), Some(&s));
            assert_eq!(r.voxels.last(), Some(&g));
            assert!(r.voxels.iter().all(|&v| !grid.is_blocked(v)));
            assert!(r.voxels.windows(2).all(|w| w[0].is_adjacent(w[1])));
            assert_eq!(r.path.len(), r.voxels.len());
        }
    }
}

#[test]
fn heuristic_is_admissible() {
    for seed in 100..200 {
        let grid = random_grid(seed, 0.2);
        let (_, goal) = free_pair(&grid, seed);
        for mode in [CostMode::Euclidean, CostMode::Uniform] {
            // edges are symmetric, so distances from the goal are distances to it
            let dist = dijkstra(&grid, goal, mode);
            for (i, d) in dist.iter().enumerate() {
                if let Some(d) = d {
                    assert!(heuristic(grid.voxel_at(i), goal, mode) <= d + 1e-12);
                }
            }
        }
    }
}

#[test]
fn expansion_f_is_monotone_with_consistent_heuristic() {
    for seed in 0..50 {
        let grid = random_grid(seed, 0.2);
        let (s, g) = free_pair(&grid, seed);
        let Ok(r) = a_star(s, g, &grid, CostMode::Euclidean) else { continue };
        assert!(r.expansion_f.windows(2).all(|w| w[1] >= w[0] - 1e-9), "seed {seed}");
    }
}

#[test]
fn deterministic_results() {
    let grid = random_grid(7, 0.2);
    let (s, g) = free_pair(&grid, 7);
    let a = a_star(s, g, &grid, CostMode::Uniform);
    let b = a_star(s, g, &grid, CostMode::Uniform);
    assert_eq!(a, b);
}

#[test]
fn straight_corridor_on_empty_map() {
    let ws = Aabb::new(Vec3::ZERO, Vec3::new(4.0, 2.0, 2.0));
    let grid = build_grid(&ObstacleSet::default(), &ws, 0.25, Vec3::ZERO).unwrap();
    let (s, g) = (Voxel::new(0, 3, 3), Voxel::new(15, 3, 3));
    let r = a_star(s, g, &grid, CostMode::Euclidean).unwrap();
    assert_eq!(r.voxels.len(), 16);
    assert!(r.voxels.iter().all(|v| v.y == 3 && v.z == 3));
    assert_eq!(r.cost, 15.0);
    assert_eq!(dijkstra(&grid, s, CostMode::Euclidean)[grid.index(g).unwrap()], Some(15.0));
}

#[test]
fn inflated_wall_forces_detour() {
    // a wall across x = 2 with a gap near y = 3.5
    let ws = Aabb::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 1.0));
    let wall = ObstacleSet {
        boxes: vec![Aabb::new(Vec3::new(1.9, 0.0, 0.0), Vec3::new(2.1, 3.0, 1.0))],
    };
    let grid = build_grid(&wall, &ws, 0.25, Vec3::new(0.1775, 0.1775, 0.0625)).unwrap();
    let s = grid.locate(Vec3::new(0.3, 0.3, 0.5)).unwrap();
    let g = grid.locate(Vec3::new(3.7, 0.3, 0.5)).unwrap();
    let r = a_star(s, g, &grid, CostMode::Euclidean).unwrap();
    let top = r.path.iter().map(|p| p.y).fold(f64::MIN, f64::max);
    assert!(top > 3.0 + 0.1775, "path must round the inflated wall end, max y {top}");
}
