//! Adaptive PID position control for a point-mass drone, with gains scheduled
//! by a PPO-trained policy, and a voxel A* planner feeding it setpoints.

pub mod controller;
pub mod episode;
pub mod exec;
pub mod metrics;
pub mod neural;
pub mod planner;
pub mod ppo;
pub mod rng;
pub mod simenv;
pub mod vec3;

pub use controller::{ControllerMode, GainBounds, Gains};
pub use exec::Exec;
pub use simenv::{DroneEnv, ErrorSignal, SimConfig};
pub use vec3::{Aabb, Vec3};
