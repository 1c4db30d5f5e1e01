//! Simulated planar LiDAR: a fan of `n_rays` rays spread across `fov`,
//! centered on the vehicle heading, cast from the mounted origin.

use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scene::{ray_cast, Scene};
use crate::vehicle::VehicleState;

/// Sensor geometry. The mount height is carried for config fidelity but
/// unused by the planar intersection math.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub offset_x: f64,
    pub offset_y: f64,
    pub offset_z: f64,
    pub n_rays: usize,
    pub fov: f64,
    pub r_max: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            offset_x: 0.0,
            offset_y: 0.0,
            offset_z: 0.1,
            n_rays: 170,
            fov: 2.0 * std::f64::consts::FRAC_PI_3,
            r_max: 10.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_rays >= 2, "n_rays must be at least 2");
        ensure!(
            self.fov > 0.0 && self.fov <= 2.0 * std::f64::consts::PI,
            "fov must be in (0, 2*pi]"
        );
        ensure!(self.r_max > 0.0, "r_max must be positive");
        Ok(())
    }

    pub fn mount_offset(&self) -> Vec2 {
        Vec2::new(self.offset_x, self.offset_y)
    }
}

/// One full sweep: per-ray hit distances plus hit flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub distances: Vec<f64>,
    pub hit_flags: Vec<bool>,
}

impl LidarScan {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Sensor origin: vehicle position plus the mount offset rotated by yaw.
pub fn ray_origin(state: &VehicleState, config: &LidarConfig) -> Vec2 {
    state.position + config.mount_offset().rotated(state.yaw)
}

/// Heading of ray `k`: yaw - fov/2 + fov * k/(n-1). Ray 0 is the right edge
/// of the fan, ray n-1 the left edge; the fan is centered on the yaw.
pub fn ray_heading(yaw: f64, config: &LidarConfig, k: usize) -> f64 {
    debug_assert!(k < config.n_rays);
    yaw - config.fov / 2.0 + config.fov * (k as f64) / ((config.n_rays - 1) as f64)
}

/// Cast the whole fan. Each distance equals `ray_cast` for the same ray.
pub fn scan(scene: &Scene, state: &VehicleState, config: &LidarConfig, time: f64) -> LidarScan {
    let origin = ray_origin(state, config);
    let n = config.n_rays;
    let mut distances = Vec::with_capacity(n);
    let mut hit_flags = Vec::with_capacity(n);
    for k in 0..n {
        let theta = ray_heading(state.yaw, config, k);
        let dir = Vec2::new(theta.cos(), theta.sin());
        let (d, hit) = ray_cast(scene, origin, dir, config.r_max, time);
        distances.push(d);
        hit_flags.push(hit);
    }
    LidarScan { distances, hit_flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;
    use crate::scene::Scene;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn open_scene(segments: Vec<Segment>) -> Scene {
        Scene {
            name: String::new(),
            bounds: crate::geometry::Aabb::new(Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)),
            open_bounds: true,
            wrap_circles: false,
            start_position: Vec2::ZERO,
            start_yaw: 0.0,
            segments,
            circles: Vec::new(),
            finish: None,
        }
    }

    #[test]
    fn ray_origin_examples() {
        let mut config = LidarConfig::default();
        let state = VehicleState { position: Vec2::new(3.0, 4.0), yaw: 1.0, v_joint: 0.0 };
        assert_eq!(ray_origin(&state, &config), Vec2::new(3.0, 4.0));

        config.offset_x = 0.2;
        let state = VehicleState { position: Vec2::ZERO, yaw: 0.0, v_joint: 0.0 };
        assert_eq!(ray_origin(&state, &config), Vec2::new(0.2, 0.0));

        let state = VehicleState { position: Vec2::new(1.0, 2.0), yaw: FRAC_PI_2, v_joint: 0.0 };
        let o = ray_origin(&state, &config);
        assert!((o.x - 1.0).abs() < 1e-15);
        assert!((o.y - 2.2).abs() < 1e-15);
    }

    #[test]
    fn fan_spans_fov_centered_on_yaw() {
        let config = LidarConfig { n_rays: 5, ..Default::default() };
        let yaw = 0.4;
        let first = ray_heading(yaw, &config, 0);
        let last = ray_heading(yaw, &config, config.n_rays - 1);
        assert!((last - first - config.fov).abs() < 1e-12);
        assert!(((first + last) / 2.0 - yaw).abs() < 1e-12);
        let mid = ray_heading(yaw, &config, 2);
        assert!((mid - yaw).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_reads_r_max() {
        let scene = open_scene(Vec::new());
        let config = LidarConfig { n_rays: 9, ..Default::default() };
        let state = VehicleState::at_rest(Vec2::ZERO, 0.0);
        let s = scan(&scene, &state, &config, 0.0);
        assert_eq!(s.len(), 9);
        assert!(s.distances.iter().all(|&d| d == config.r_max));
        assert!(s.hit_flags.iter().all(|&h| !h));
    }

    #[test]
    fn frontal_wall_trigonometry() {
        // Wall x = 5 spanning the whole fan; odd ray count puts one ray on
        // the heading. Edge rays at +/-60 degrees read 5/cos(60) = 10.
        let scene = open_scene(vec![Segment::new(
            Vec2::new(5.0, -100.0),
            Vec2::new(5.0, 100.0),
        )]);
        let config = LidarConfig { n_rays: 171, r_max: 12.0, ..Default::default() };
        let state = VehicleState::at_rest(Vec2::ZERO, 0.0);
        let s = scan(&scene, &state, &config, 0.0);
        let center = (config.n_rays - 1) / 2;
        assert!((s.distances[center] - 5.0).abs() < 1e-12);
        assert!((s.distances[0] - 10.0).abs() < 1e-9);
        assert!((s.distances[config.n_rays - 1] - 10.0).abs() < 1e-9);
        assert!(s.hit_flags.iter().all(|&h| h));
    }

    #[test]
    fn mirrored_scene_reverses_scan() {
        let scene = open_scene(vec![
            Segment::new(Vec2::new(4.0, -3.0), Vec2::new(6.0, 1.0)),
            Segment::new(Vec2::new(2.0, 0.5), Vec2::new(3.0, 2.5)),
        ]);
        let mirrored = open_scene(
            scene
                .segments
                .iter()
                .map(|s| {
                    Segment::new(
                        Vec2::new(s.a.x, -s.a.y),
                        Vec2::new(s.b.x, -s.b.y),
                    )
                })
                .collect(),
        );
        let config = LidarConfig { n_rays: 33, ..Default::default() };
        let state = VehicleState::at_rest(Vec2::ZERO, 0.0);
        let a = scan(&scene, &state, &config, 0.0);
        let b = scan(&mirrored, &state, &config, 0.0);
        for k in 0..config.n_rays {
            let flipped = config.n_rays - 1 - k;
            assert!(
                (a.distances[k] - b.distances[flipped]).abs() < 1e-9,
                "ray {k}: {} vs {}",
                a.distances[k],
                b.distances[flipped]
            );
            assert_eq!(a.hit_flags[k], b.hit_flags[flipped]);
        }
    }

    #[test]
    fn rotational_equivariance() {
        let segments = vec![
            Segment::new(Vec2::new(4.0, -3.0), Vec2::new(6.0, 1.0)),
            Segment::new(Vec2::new(-2.0, 3.0), Vec2::new(1.0, 4.0)),
        ];
        let config = LidarConfig { n_rays: 21, ..Default::default() };
        let pose = VehicleState { position: Vec2::new(0.5, -0.25), yaw: 0.3, v_joint: 0.0 };
        let base = scan(&open_scene(segments.clone()), &pose, &config, 0.0);
        for angle in [0.7, -1.3, PI / 3.0, 2.9] {
            let rotated_scene = open_scene(
                segments
                    .iter()
                    .map(|s| Segment::new(s.a.rotated(angle), s.b.rotated(angle)))
                    .collect(),
            );
            let rotated_pose = VehicleState {
                position: pose.position.rotated(angle),
                yaw: pose.yaw + angle,
                v_joint: 0.0,
            };
            let s = scan(&rotated_scene, &rotated_pose, &config, 0.0);
            for k in 0..config.n_rays {
                assert!(
                    (base.distances[k] - s.distances[k]).abs() < 1e-9,
                    "angle {angle}, ray {k}"
                );
                assert_eq!(base.hit_flags[k], s.hit_flags[k]);
            }
        }
    }

    #[test]
    fn scan_delegates_to_ray_cast_exactly() {
        let scene = open_scene(vec![
            Segment::new(Vec2::new(4.0, -3.0), Vec2::new(6.0, 1.0)),
            Segment::new(Vec2::new(-2.0, 3.0), Vec2::new(1.0, 4.0)),
        ]);
        let config = LidarConfig { offset_x: 0.15, n_rays: 17, ..Default::default() };
        let state = VehicleState { position: Vec2::new(0.4, 0.2), yaw: -0.5, v_joint: 0.0 };
        let s = scan(&scene, &state, &config, 0.0);
        let origin = ray_origin(&state, &config);
        for k in 0..config.n_rays {
            let theta = ray_heading(state.yaw, &config, k);
            let (d, hit) =
                ray_cast(&scene, origin, Vec2::new(theta.cos(), theta.sin()), config.r_max, 0.0);
            assert_eq!(d.to_bits(), s.distances[k].to_bits());
            assert_eq!(hit, s.hit_flags[k]);
        }
    }

    #[test]
    fn config_validation() {
        assert!(LidarConfig::default().validate().is_ok());
        assert!(LidarConfig { n_rays: 1, ..Default::default() }.validate().is_err());
        assert!(LidarConfig { fov: 0.0, ..Default::default() }.validate().is_err());
        assert!(LidarConfig { r_max: -1.0, ..Default::default() }.validate().is_err());
    }
}
