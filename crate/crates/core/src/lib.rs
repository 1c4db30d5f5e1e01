//! 2D LiDAR racing simulator with a from-scratch PPO trainer and a PID
//! wall-following baseline.
//!
//! Everything is deterministic given a seed: the simulation is noise-free,
//! rollouts use per-worker counter-based RNG streams, and checkpoints
//! round-trip parameters bit-exactly.

pub mod buffer;
pub mod env;
pub mod geometry;
pub mod lidar;
pub mod nn;
pub mod config;
pub mod eval;
pub mod optim;
pub mod pid;
pub mod ppo;
pub mod scene;
pub mod selfcheck;
pub mod vehicle;

pub use env::{RawAction, StepResult, TaskEnv, TaskOptions};
pub use geometry::{Aabb, CircleObstacle, Segment, Vec2};
pub use lidar::{LidarConfig, LidarScan};
pub use nn::{Arch, PolicyParams};
pub use scene::{load_scene, Scene, SceneError};
pub use vehicle::{VehicleParams, VehicleState};
