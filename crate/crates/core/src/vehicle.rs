//! Planar vehicle propagation: throttle-driven joint-velocity dynamics with
//! quadratic resistance, composed with kinematic bicycle steering.

use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Actuator and platform constants. Defaults give a 5 m/s steady-state top
/// speed: C_T = v*(v*C_f1 + C_f2) at v = 5 with C_T=20, C_f1=0.6, C_f2=1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub c_t: f64,
    pub c_f1: f64,
    pub c_f2: f64,
    pub wheelbase: f64,
    pub v_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub t_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            c_t: 20.0,
            c_f1: 0.6,
            c_f2: 1.0,
            wheelbase: 0.33,
            v_max: 5.0,
            delta_min: -0.36,
            delta_max: 0.36,
            t_s: 0.025,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.c_t > 0.0, "c_t must be positive");
        ensure!(self.c_f1 >= 0.0, "c_f1 must be nonnegative");
        ensure!(self.c_f2 >= 0.0, "c_f2 must be nonnegative");
        ensure!(self.wheelbase > 0.0, "wheelbase must be positive");
        ensure!(self.v_max > 0.0, "v_max must be positive");
        ensure!(
            self.delta_min < 0.0 && 0.0 < self.delta_max,
            "steering limits must straddle zero"
        );
        ensure!(self.t_s > 0.0, "t_s must be positive");
        Ok(())
    }
}

/// Pose plus joint velocity in the global frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    /// Heading, wrapped to (-pi, pi].
    pub yaw: f64,
    /// Forward joint velocity, clamped to [0, v_max].
    pub v_joint: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vec2, yaw: f64) -> Self {
        VehicleState { position, yaw: wrap_angle(yaw), v_joint: 0.0 }
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.yaw.cos(), self.yaw.sin())
    }
}

/// Wrap an angle to (-pi, pi]. Already-wrapped angles pass through
/// bit-identically (the rem_euclid round-trip costs a ulp otherwise).
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = PI - (PI - angle).rem_euclid(2.0 * PI);
    debug_assert!(wrapped > -PI - 1e-12 && wrapped <= PI + 1e-12);
    wrapped
}

/// Resistance as a deceleration: f = v_prev * (v_prev * C_f1 + C_f2).
pub fn resistive_force(v_prev: f64, params: &VehicleParams) -> f64 {
    debug_assert!(v_prev >= 0.0);
    v_prev * (v_prev * params.c_f1 + params.c_f2)
}

/// One explicit-Euler step of the actuator dynamics plus bicycle steering.
///
/// Velocity update uses the previous step's velocity in the resistance term.
/// Yaw integrates first; the position step then moves along the new heading.
pub fn step_dynamics(
    state: &VehicleState,
    throttle: f64,
    steering: f64,
    params: &VehicleParams,
) -> VehicleState {
    assert!((0.0..=1.0).contains(&throttle), "throttle out of [0,1]: {throttle}");
    assert!(
        steering >= params.delta_min && steering <= params.delta_max,
        "steering out of [{}, {}]: {steering}",
        params.delta_min,
        params.delta_max
    );
    let f = resistive_force(state.v_joint, params);
    let v_new = (state.v_joint + params.t_s * (params.c_t * throttle - f)).clamp(0.0, params.v_max);
    let yaw_new = wrap_angle(state.yaw + params.t_s * (v_new / params.wheelbase) * steering.tan());
    let position = state.position + Vec2::new(yaw_new.cos(), yaw_new.sin()) * (params.t_s * v_new);
    VehicleState { position, yaw: yaw_new, v_joint: v_new }
}
