//! Wall-following PID baseline. Consumes only the LiDAR scan, the same
//! information interface the learned policy gets.
//!
//! The side-distance estimate projects each ray in the 45-90 degree side
//! sector onto the wall normal (distance * sin |angle|), which reads the
//! exact perpendicular distance to a straight wall regardless of the
//! sensor's field of view. Throttle is the cruise setting, scaled down
//! linearly once the frontal-sector minimum drops under the slowdown
//! distance.

use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

use crate::env::RawAction;
use crate::lidar::{ray_heading, LidarConfig, LidarScan};

/// Frontal sector half-angle. Narrow enough that a followed wall at the
/// default 0.8 m target reads 0.8/sin(15 deg) = 3.1 m here, clear of the
/// 2 m slowdown threshold, so cruise throttle is reachable while tracking.
const FRONT_HALF_ANGLE: f64 = FRAC_PI_6 * 0.5;

/// Which wall to follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Desired perpendicular wall distance, meters.
    pub target_distance: f64,
    pub cruise_throttle: f64,
    /// Frontal distance at which throttle scaling begins, meters.
    pub slowdown_distance: f64,
    pub side: Side,
}

impl Default for PidParams {
    fn default() -> Self {
        PidParams {
            kp: 1.5,
            ki: 0.0,
            kd: 0.3,
            target_distance: 0.8,
            cruise_throttle: 0.5,
            slowdown_distance: 2.0,
            side: Side::Right,
        }
    }
}

impl PidParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.target_distance > 0.0, "target_distance must be positive");
        ensure!(
            (0.0..=1.0).contains(&self.cruise_throttle),
            "cruise_throttle must be in [0, 1]"
        );
        ensure!(self.slowdown_distance > 0.0, "slowdown_distance must be positive");
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            ensure!(v.is_finite(), "{name} must be finite");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PidController {
    params: PidParams,
    /// Control period in seconds; integral and derivative terms work in
    /// real-time units so the gains are tick-rate independent.
    t_s: f64,
    /// Side-sector rays as (index, sin |relative angle|) projection pairs.
    side_rays: Vec<(usize, f64)>,
    front_rays: Vec<usize>,
    integral: f64,
    prev_error: Option<f64>,
}

impl PidController {
    pub fn new(params: PidParams, lidar: &LidarConfig, t_s: f64) -> Result<PidController> {
        params.validate()?;
        lidar.validate()?;
        ensure!(t_s > 0.0, "control period t_s must be positive");
        let mut side_rays = Vec::new();
        let mut front_rays = Vec::new();
        for k in 0..lidar.n_rays {
            // Ray angle relative to the heading; negative is clockwise
            // (vehicle right).
            let alpha = ray_heading(0.0, lidar, k);
            let on_side = match params.side {
                Side::Right => (-FRAC_PI_2..=-FRAC_PI_4).contains(&alpha),
                Side::Left => (FRAC_PI_4..=FRAC_PI_2).contains(&alpha),
            };
            if on_side {
                side_rays.push((k, alpha.abs().sin()));
            }
            if alpha.abs() <= FRONT_HALF_ANGLE {
                front_rays.push(k);
            }
        }
        ensure!(
            !side_rays.is_empty(),
            "field of view {:.3} rad has no rays in the 45-90 degree side sector",
            lidar.fov
        );
        ensure!(!front_rays.is_empty(), "field of view has no frontal rays");
        Ok(PidController { params, t_s, side_rays, front_rays, integral: 0.0, prev_error: None })
    }

    /// Clear integrator and derivative memory; call between episodes.
    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn params(&self) -> &PidParams {
        &self.params
    }

    /// One control decision.
    pub fn act(&mut self, scan: &LidarScan) -> RawAction {
        let side_distance = self
            .side_rays
            .iter()
            .map(|&(k, sin_alpha)| scan.distances[k] * sin_alpha)
            .fold(f64::INFINITY, f64::min);
        let error = self.params.target_distance - side_distance;
        self.integral += error * self.t_s;
        let derivative = self.prev_error.map_or(0.0, |prev| (error - prev) / self.t_s);
        self.prev_error = Some(error);
        let u = (self.params.kp * error
            + self.params.ki * self.integral
            + self.params.kd * derivative)
            .clamp(-1.0, 1.0);
        // Positive steering turns left. Too close to a followed right wall
        // (positive error) must steer left, and mirrored for the left wall.
        let steering = match self.params.side {
            Side::Right => u,
            Side::Left => -u,
        };
        let front_min = self
            .front_rays
            .iter()
            .map(|&k| scan.distances[k])
            .fold(f64::INFINITY, f64::min);
        let throttle =
            self.params.cruise_throttle * (front_min / self.params.slowdown_distance).min(1.0);
        RawAction::new(throttle, steering)
    }
}
