//! Run configuration: one TOML file fully describes a training or
//! evaluation run. Every section falls back to defaults, so the minimal
//! config is just a scene path. Paths are interpreted relative to the
//! process working directory.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::env::TaskOptions;
use crate::lidar::LidarConfig;
use crate::pid::PidParams;
use crate::ppo::Hyperparams;
use crate::vehicle::VehicleParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerChoice {
    Policy,
    Pid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scene: PathBuf,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub controller: ControllerChoice,
    /// Policy weights for evaluation; training always writes its own.
    pub checkpoint: Option<PathBuf>,
    pub hyperparams: Hyperparams,
    pub vehicle: VehicleParams,
    pub lidar: LidarConfig,
    pub task: TaskOptions,
    pub pid: PidParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: PathBuf::from("tracks/training.scene"),
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            controller: ControllerChoice::Policy,
            checkpoint: None,
            hyperparams: Hyperparams::default(),
            vehicle: VehicleParams::default(),
            lidar: LidarConfig::default(),
            task: TaskOptions::default(),
            pid: PidParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.vehicle.validate()?;
        self.lidar.validate()?;
        self.task.validate()?;
        self.pid.validate()?;
        Ok(())
    }

    /// Serialize the fully resolved configuration, defaults included, so
    /// the output directory is self-describing and the run reproducible.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        let text = toml::to_string_pretty(self).context("serializing config")?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Worker-thread bound from `DEPTHNAV_THREADS`. Unset means library
/// default; set but malformed is a hard error rather than a silent
/// fallback that would change results.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("DEPTHNAV_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .with_context(|| format!("DEPTHNAV_THREADS={raw:?} is not a thread count"))?;
            anyhow::ensure!(n >= 1, "DEPTHNAV_THREADS must be at least 1");
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context("reading DEPTHNAV_THREADS"),
    }
}
