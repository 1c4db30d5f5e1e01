//! The reinforcement-learning task: scan-based observations, normalized
//! actions mapped to throttle/steering, the sparse racing reward with the
//! saturated steering-flip penalty, and collision/step-cap termination with
//! reset to the scene's fixed start pose.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::lidar::{scan, LidarConfig, LidarScan};
use crate::scene::{collision_check, Scene};
use crate::vehicle::{step_dynamics, VehicleParams, VehicleState};

/// Reward added when two consecutive steering actions saturate at opposite
/// bounds.
pub const FLIP_PENALTY: f64 = -2.0;
/// Slack on the product test so exact saturation survives rounding.
pub const FLIP_PRODUCT_TOL: f64 = 1e-6;

/// Task-level knobs independent of vehicle/sensor physics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskOptions {
    pub max_episode_steps: u64,
    /// Ablation switch for the steering-flip penalty.
    pub penalty_enabled: bool,
    /// Compare pre-clamp steering outputs in the penalty test.
    pub penalty_on_raw: bool,
    /// Divide depths by r_max; disable to feed raw meters (ablation).
    pub normalize_obs: bool,
    pub footprint_radius: f64,
}

impl Default for TaskOptions {
    fn default() -> Self {
        TaskOptions {
            max_episode_steps: 10_000,
            penalty_enabled: true,
            penalty_on_raw: false,
            normalize_obs: true,
            footprint_radius: 0.25,
        }
    }
}

impl TaskOptions {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.max_episode_steps > 0, "max_episode_steps must be positive");
        ensure!(self.footprint_radius > 0.0, "footprint_radius must be positive");
        Ok(())
    }
}

/// Depth vector fed to the policy; entries in (0, 1] when normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Unitless two-channel action. The environment clamps both components to
/// [-1, 1] before any downstream use; policies may emit values outside.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawAction {
    pub a_throttle: f64,
    pub a_steering: f64,
}

impl RawAction {
    pub fn new(a_throttle: f64, a_steering: f64) -> Self {
        RawAction { a_throttle, a_steering }
    }

    pub fn clamped(self) -> RawAction {
        RawAction {
            a_throttle: self.a_throttle.clamp(-1.0, 1.0),
            a_steering: self.a_steering.clamp(-1.0, 1.0),
        }
    }
}

/// Physical control command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Throttle in [0, 1].
    pub throttle: f64,
    /// Steering angle in radians, within [delta_min, delta_max].
    pub steering: f64,
}

/// Map a clamped action to controls: throttle floors at 0, steering scales
/// by delta_max so +/-1 maps to the +/-0.36 rad limits, then clamps.
pub fn map_action(raw: RawAction, params: &VehicleParams) -> ControlInput {
    let raw = raw.clamped();
    ControlInput {
        throttle: raw.a_throttle.clamp(0.0, 1.0),
        steering: (raw.a_steering * params.delta_max).clamp(params.delta_min, params.delta_max),
    }
}

/// True when consecutive steering actions saturate at opposite bounds.
pub fn saturated_flip(a_prev: f64, a_curr: f64) -> bool {
    a_prev * a_curr <= -1.0 + FLIP_PRODUCT_TOL
}

/// Per-step reward: 5*T^2, minus 2.0 on a saturated steering flip.
pub fn compute_reward(throttle: f64, a_steering_prev: f64, a_steering_curr: f64) -> f64 {
    let base = 5.0 * throttle * throttle;
    if saturated_flip(a_steering_prev, a_steering_curr) {
        base + FLIP_PENALTY
    } else {
        base
    }
}

/// Mutable per-episode state, serializable for exact training resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub vehicle: VehicleState,
    pub step_count: u64,
    /// Previous clamped steering action; 0 at reset so the penalty cannot
    /// fire on the first step.
    pub prev_a_steering: f64,
    /// Previous pre-clamp steering action, for `penalty_on_raw`.
    pub prev_a_steering_raw: f64,
    pub sim_time: f64,
    pub cumulative_reward: f64,
    pub finished: bool,
    pub seed: u64,
}

/// Step diagnostics surfaced alongside the observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub position: Vec2,
    pub yaw: f64,
    pub speed: f64,
    pub control: ControlInput,
    /// Clamped action actually used by the environment.
    pub action: RawAction,
    pub reward_throttle_term: f64,
    pub reward_penalty_term: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// One agent's world: immutable scene/config plus the live episode.
#[derive(Clone, Debug)]
pub struct TaskEnv {
    scene: Scene,
    vehicle_params: VehicleParams,
    lidar_config: LidarConfig,
    options: TaskOptions,
    episode: EpisodeState,
    last_scan: LidarScan,
}

impl TaskEnv {
    pub fn new(
        scene: Scene,
        vehicle_params: VehicleParams,
        lidar_config: LidarConfig,
        options: TaskOptions,
    ) -> Result<Self> {
        vehicle_params.validate().context("vehicle params")?;
        lidar_config.validate().context("lidar config")?;
        options.validate().context("task options")?;
        scene
            .validate(options.footprint_radius)
            .map_err(|e| anyhow::anyhow!("{e}"))
            .context("scene")?;
        let mut env = TaskEnv {
            scene,
            vehicle_params,
            lidar_config,
            options,
            episode: EpisodeState {
                vehicle: VehicleState::at_rest(Vec2::ZERO, 0.0),
                step_count: 0,
                prev_a_steering: 0.0,
                prev_a_steering_raw: 0.0,
                sim_time: 0.0,
                cumulative_reward: 0.0,
                finished: false,
                seed: 0,
            },
            last_scan: LidarScan { distances: Vec::new(), hit_flags: Vec::new() },
        };
        env.reset(0);
        Ok(env)
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn vehicle_params(&self) -> &VehicleParams {
        &self.vehicle_params
    }

    pub fn lidar_config(&self) -> &LidarConfig {
        &self.lidar_config
    }

    pub fn options(&self) -> &TaskOptions {
        &self.options
    }

    pub fn episode(&self) -> &EpisodeState {
        &self.episode
    }

    /// The scan behind the most recent observation.
    pub fn last_scan(&self) -> &LidarScan {
        &self.last_scan
    }

    /// Number of observation entries (= configured ray count).
    pub fn obs_dim(&self) -> usize {
        self.lidar_config.n_rays
    }

    fn observe(&mut self) -> Observation {
        let s = scan(&self.scene, &self.episode.vehicle, &self.lidar_config, self.episode.sim_time);
        let obs = if self.options.normalize_obs {
            Observation(s.distances.iter().map(|d| d / self.lidar_config.r_max).collect())
        } else {
            Observation(s.distances.clone())
        };
        self.last_scan = s;
        obs
    }

    /// Start a fresh episode at the scene's start pose with zero velocity.
    /// The environment itself is deterministic; the seed is recorded for
    /// provenance (action sampling happens in the agent).
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.episode = EpisodeState {
            vehicle: VehicleState::at_rest(self.scene.start_position, self.scene.start_yaw),
            step_count: 0,
            prev_a_steering: 0.0,
            prev_a_steering_raw: 0.0,
            sim_time: 0.0,
            cumulative_reward: 0.0,
            finished: false,
            seed,
        };
        self.observe()
    }

    /// Advance one control period. Errors on stepping a finished episode.
    pub fn step(&mut self, raw: RawAction) -> Result<StepResult> {
        if self.episode.finished {
            bail!("step called on a finished episode; call reset first");
        }
        let clamped = raw.clamped();
        let control = map_action(clamped, &self.vehicle_params);
        self.episode.vehicle =
            step_dynamics(&self.episode.vehicle, control.throttle, control.steering, &self.vehicle_params);
        self.episode.sim_time += self.vehicle_params.t_s;
        self.episode.step_count += 1;

        let observation = self.observe();

        let (prev, curr) = if self.options.penalty_on_raw {
            (self.episode.prev_a_steering_raw, raw.a_steering)
        } else {
            (self.episode.prev_a_steering, clamped.a_steering)
        };
        let throttle_term = 5.0 * control.throttle * control.throttle;
        let penalty_term = if self.options.penalty_enabled && saturated_flip(prev, curr) {
            FLIP_PENALTY
        } else {
            0.0
        };
        let reward = throttle_term + penalty_term;

        let terminated = collision_check(
            &self.scene,
            self.episode.vehicle.position,
            self.options.footprint_radius,
            self.episode.sim_time,
        );
        let truncated = self.episode.step_count >= self.options.max_episode_steps;

        self.episode.prev_a_steering = clamped.a_steering;
        self.episode.prev_a_steering_raw = raw.a_steering;
        self.episode.cumulative_reward += reward;
        self.episode.finished = terminated || truncated;

        Ok(StepResult {
            observation,
            reward,
            terminated,
            truncated,
            info: StepInfo {
                position: self.episode.vehicle.position,
                yaw: self.episode.vehicle.yaw,
                speed: self.episode.vehicle.v_joint,
                control,
                action: clamped,
                reward_throttle_term: throttle_term,
                reward_penalty_term: penalty_term,
            },
        })
    }

    /// Restore a snapshot taken from `episode()`, for exact training resume.
    pub fn restore(&mut self, episode: EpisodeState) -> Observation {
        self.episode = episode;
        self.observe()
    }
}
