//! Python bindings for the simulator and policy runtime: scene parsing,
//! the task environment, trained policy inference, and the PID baseline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use depthnav::env::{RawAction, TaskEnv, TaskOptions};
use depthnav::eval::policy_from_checkpoint;
use depthnav::lidar::{LidarConfig, LidarScan};
use depthnav::nn::{self, PolicyParams};
use depthnav::pid::{PidController, PidParams};
use depthnav::ppo::Checkpoint;
use depthnav::scene;
use depthnav::vehicle::VehicleParams;

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Static and moving geometry plus the start pose.
#[pyclass(name = "Scene", module = "depthnav_py")]
#[derive(Clone)]
struct PyScene {
    inner: scene::Scene,
}

#[pymethods]
impl PyScene {
    /// Parse scene text in the line-oriented directive format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyScene { inner: scene::Scene::parse(text).map_err(value_err)? })
    }

    /// Load a `.scene` file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyScene {
            inner: scene::load_scene(&path)
                .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n_segments(&self) -> usize {
        self.inner.segments.len()
    }

    #[getter]
    fn n_circles(&self) -> usize {
        self.inner.circles.len()
    }

    #[getter]
    fn has_finish_line(&self) -> bool {
        self.inner.finish.is_some()
    }

    #[getter]
    fn start(&self) -> (f64, f64, f64) {
        (self.inner.start_position.x, self.inner.start_position.y, self.inner.start_yaw)
    }

    fn __repr__(&self) -> String {
        self.inner.to_string()
    }
}

/// The task environment: LiDAR observations in, normalized actions out.
#[pyclass(name = "Env", module = "depthnav_py")]
struct PyEnv {
    env: TaskEnv,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (scene, max_episode_steps=None))]
    fn new(scene: &PyScene, max_episode_steps: Option<u64>) -> PyResult<Self> {
        let mut task = TaskOptions::default();
        if let Some(steps) = max_episode_steps {
            task.max_episode_steps = steps;
        }
        let env = TaskEnv::new(
            scene.inner.clone(),
            VehicleParams::default(),
            LidarConfig::default(),
            task,
        )
        .map_err(value_err)?;
        Ok(PyEnv { env })
    }

    /// Reset to the start pose; returns the initial observation.
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.env.reset(seed).0
    }

    /// Advance one step. Returns (observation, reward, terminated,
    /// truncated, info) with the pose and applied controls in `info`.
    fn step(
        &mut self,
        py: Python<'_>,
        a_throttle: f64,
        a_steering: f64,
    ) -> PyResult<(Vec<f64>, f64, bool, bool, Py<PyDict>)> {
        let result = self
            .env
            .step(RawAction::new(a_throttle, a_steering))
            .map_err(value_err)?;
        let info = PyDict::new_bound(py);
        info.set_item("x", result.info.position.x)?;
        info.set_item("y", result.info.position.y)?;
        info.set_item("yaw", result.info.yaw)?;
        info.set_item("speed", result.info.speed)?;
        info.set_item("throttle", result.info.control.throttle)?;
        info.set_item("steering", result.info.control.steering)?;
        Ok((
            result.observation.0,
            result.reward,
            result.terminated,
            result.truncated,
            info.into(),
        ))
    }

    /// Raw (unnormalized) hit distances of the most recent sweep.
    fn scan(&self) -> Vec<f64> {
        self.env.last_scan().distances.clone()
    }

    #[getter]
    fn n_rays(&self) -> usize {
        self.env.lidar_config().n_rays
    }

    #[getter]
    fn position(&self) -> (f64, f64) {
        let p = self.env.episode().vehicle.position;
        (p.x, p.y)
    }

    #[getter]
    fn yaw(&self) -> f64 {
        self.env.episode().vehicle.yaw
    }

    #[getter]
    fn speed(&self) -> f64 {
        self.env.episode().vehicle.v_joint
    }

    #[getter]
    fn sim_time(&self) -> f64 {
        self.env.episode().sim_time
    }
}

/// A trained actor-critic loaded from a checkpoint file.
#[pyclass(name = "Policy", module = "depthnav_py")]
struct PyPolicy {
    params: PolicyParams,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyPolicy {
    /// Load checkpoint weights; `seed` drives stochastic action draws.
    #[staticmethod]
    #[pyo3(signature = (path, seed=0))]
    fn load(path: PathBuf, seed: u64) -> PyResult<Self> {
        let checkpoint = Checkpoint::load(&path)
            .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let input_dim = checkpoint.params.arch.input_dim;
        let params = policy_from_checkpoint(&checkpoint, input_dim).map_err(value_err)?;
        Ok(PyPolicy { params, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Map an observation to a pre-clamp (a_throttle, a_steering) pair.
    #[pyo3(signature = (obs, deterministic=true))]
    fn act(&mut self, obs: Vec<f64>, deterministic: bool) -> PyResult<(f64, f64)> {
        if obs.len() != self.params.arch.input_dim {
            return Err(PyValueError::new_err(format!(
                "expected {} observation dims, got {}",
                self.params.arch.input_dim,
                obs.len()
            )));
        }
        let action = if deterministic {
            nn::forward(&self.params, &obs).mean
        } else {
            nn::act(&self.params, &obs, &mut self.rng).action
        };
        Ok((action[0], action[1]))
    }

    /// Critic value estimate for an observation.
    fn value(&self, obs: Vec<f64>) -> PyResult<f64> {
        if obs.len() != self.params.arch.input_dim {
            return Err(PyValueError::new_err(format!(
                "expected {} observation dims, got {}",
                self.params.arch.input_dim,
                obs.len()
            )));
        }
        Ok(nn::forward(&self.params, &obs).value)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.params.arch.input_dim
    }
}

/// The wall-following PID baseline controller.
#[pyclass(name = "Pid", module = "depthnav_py")]
struct PyPid {
    ctrl: PidController,
    n_rays: usize,
}

#[pymethods]
impl PyPid {
    #[new]
    fn new() -> PyResult<Self> {
        let lidar = LidarConfig::default();
        let n_rays = lidar.n_rays;
        let ctrl = PidController::new(PidParams::default(), &lidar, VehicleParams::default().t_s)
            .map_err(value_err)?;
        Ok(PyPid { ctrl, n_rays })
    }

    /// Map raw scan distances to an (a_throttle, a_steering) pair.
    fn act(&mut self, distances: Vec<f64>) -> PyResult<(f64, f64)> {
        if distances.len() != self.n_rays {
            return Err(PyValueError::new_err(format!(
                "expected {} rays, got {}",
                self.n_rays,
                distances.len()
            )));
        }
        let hit_flags = vec![true; distances.len()];
        let action = self.ctrl.act(&LidarScan { distances, hit_flags });
        Ok((action.a_throttle, action.a_steering))
    }

    fn reset(&mut self) {
        self.ctrl.reset();
    }
}

#[pymodule]
fn depthnav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyPid>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
