//! Obstacle map files.
//!
//! ```toml
//! workspace_min = [0.0, 0.0, 0.0]
//! workspace_max = [10.0, 10.0, 3.0]
//!
//! [[obstacle]]
//! min = [4.0, 0.0, 0.0]
//! max = [4.5, 8.0, 3.0]
//! ```

use std::fs;
use std::path::Path;

use airpid::planner::ObstacleSet;
use airpid::{Aabb, Vec3};
use serde::Deserialize;

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct Box3 {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    workspace_min: [f64; 3],
    workspace_max: [f64; 3],
    #[serde(default)]
    obstacle: Vec<Box3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    pub workspace: Aabb,
    pub obstacles: ObstacleSet,
}

impl Map {
    pub fn parse(text: &str) -> Result<Self, AppError> {
        let raw: MapFile = toml::from_str(text).map_err(|e| AppError::Config(format!("map: {e}")))?;
        let aabb = |min: [f64; 3], max: [f64; 3]| Aabb::new(Vec3::from_array(min), Vec3::from_array(max));
        let workspace = aabb(raw.workspace_min, raw.workspace_max);
        if !workspace.is_nondegenerate() {
            return Err(AppError::Config("map: workspace box is degenerate".into()));
        }
        let mut boxes = Vec::with_capacity(raw.obstacle.len());
        for (i, b) in raw.obstacle.iter().enumerate() {
            let bx = aabb(b.min, b.max);
            if !bx.is_nondegenerate() {
                return Err(AppError::Config(format!("map: obstacle {i} is degenerate")));
            }
            boxes.push(bx);
        }
        Ok(Map { workspace, obstacles: ObstacleSet { boxes } })
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("cannot read map {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_boxes() {
        let m = Map::parse(
            "workspace_min = [0, 0, 0]\nworkspace_max = [4, 4, 2]\n[[obstacle]]\nmin = [1, 1, 0]\nmax = [2, 2, 2]\n",
        )
        .unwrap();
        assert_eq!(m.obstacles.boxes.len(), 1);
        assert_eq!(m.workspace.max, Vec3::new(4.0, 4.0, 2.0));
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(Map::parse("workspace_min = [0, 0, 0]").is_err());
        assert!(Map::parse("workspace_min = [0, 0, 0]\nworkspace_max = [1, 1, 0]").is_err());
        assert!(Map::parse("workspace_min = [0,0,0]\nworkspace_max = [1,1,1]\nwalls = 3").is_err());
    }
}
