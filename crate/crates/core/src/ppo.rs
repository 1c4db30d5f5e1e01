//! On-policy training loop: parallel rollout collection, clipped-surrogate
//! updates, learning-curve logging, and resumable checkpoints.
//!
//! Determinism contract: given the same config and seed, training is
//! bit-identical regardless of thread count. Every random stream is a
//! counter-addressed ChaCha8 instance (initialization on stream 0, update
//! shuffling on stream 1, worker w on stream 2 + w); workers never share
//! mutable state during collection, and the update phase is single-threaded.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{RolloutBuffer, Transition};
use crate::env::{EpisodeState, RawAction, TaskEnv, TaskOptions};
use crate::lidar::LidarConfig;
use crate::nn::{self, Arch, LossSpec, PolicyParams};
use crate::optim::{clip_global_norm, Optimizer, OptimizerKind};
use crate::scene::Scene;
use crate::vehicle::VehicleParams;

pub const CHECKPOINT_VERSION: u32 = 1;
/// Episodes in the moving-average window of the learning curve.
pub const RETURN_WINDOW: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Environment steps to train for (summed across workers). The loop
    /// runs whole rollouts, so the final count is rounded up.
    pub total_steps: u64,
    /// Transitions per update, split evenly among workers.
    pub rollout_steps: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub optimizer: OptimizerKind,
    pub n_envs: usize,
    /// Checkpoint every this many steps (0 disables periodic checkpoints;
    /// the final checkpoint is always written).
    pub checkpoint_interval: u64,
    /// Progress line every this many steps (0 silences).
    pub log_interval: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            total_steps: 300_000,
            rollout_steps: 2048,
            batch_size: 64,
            n_epochs: 10,
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.0,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            optimizer: OptimizerKind::Adam,
            n_envs: 1,
            checkpoint_interval: 100_000,
            log_interval: 10_000,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.total_steps > 0, "total_steps must be positive");
        ensure!(self.rollout_steps > 0, "rollout_steps must be positive");
        ensure!(self.batch_size > 0, "batch_size must be positive");
        ensure!(self.n_epochs > 0, "n_epochs must be positive");
        ensure!(self.n_envs > 0, "n_envs must be positive");
        ensure!(
            self.rollout_steps % self.n_envs == 0,
            "rollout_steps ({}) must divide evenly among n_envs ({})",
            self.rollout_steps,
            self.n_envs
        );
        ensure!(
            self.rollout_steps % self.batch_size == 0,
            "rollout_steps ({}) must be a multiple of batch_size ({})",
            self.rollout_steps,
            self.batch_size
        );
        ensure!((0.0..=1.0).contains(&self.gamma), "gamma must be in [0, 1]");
        ensure!((0.0..=1.0).contains(&self.lambda), "lambda must be in [0, 1]");
        ensure!(self.clip_eps > 0.0 && self.clip_eps < 1.0, "clip_eps must be in (0, 1)");
        ensure!(self.vf_coef >= 0.0, "vf_coef must be nonnegative");
        ensure!(self.ent_coef >= 0.0, "ent_coef must be nonnegative");
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be positive"
        );
        ensure!(self.max_grad_norm > 0.0, "max_grad_norm must be positive");
        Ok(())
    }
}

/// One completed episode on the learning curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Global environment step at which the episode finished.
    pub global_step: u64,
    pub steps: u64,
    pub episodic_return: f64,
    /// Mean return over the trailing RETURN_WINDOW episodes.
    pub moving_avg: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkerSnapshot {
    pub rng: ChaCha8Rng,
    pub episode: EpisodeState,
}

/// Everything needed to continue training bit-exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub global_step: u64,
    pub episode_count: u64,
    pub params: PolicyParams,
    pub optimizer: Optimizer,
    pub update_rng: ChaCha8Rng,
    pub workers: Vec<WorkerSnapshot>,
    pub recent_returns: Vec<f64>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = fs::File::create(path)
            .with_context(|| format!("creating checkpoint {}", path.display()))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .with_context(|| format!("parsing checkpoint {}", path.display()))?;
        ensure!(
            ckpt.version == CHECKPOINT_VERSION,
            "unsupported checkpoint version {} (expected {})",
            ckpt.version,
            CHECKPOINT_VERSION
        );
        Ok(ckpt)
    }
}

/// Inputs to a training run. `out_dir`, when set, receives
/// `learning_curve.csv` and `checkpoints/`.
#[derive(Clone, Debug)]
pub struct TrainSetup {
    pub scene: Scene,
    pub vehicle: VehicleParams,
    pub lidar: LidarConfig,
    pub task: TaskOptions,
    pub hyper: Hyperparams,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub params: PolicyParams,
    pub curve: Vec<EpisodeRecord>,
    pub checkpoint: Checkpoint,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Worker {
    env: TaskEnv,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
}

/// Episode completion inside a segment: (segment index, steps, return).
type SegmentEpisode = (usize, u64, f64);

struct SegmentOut {
    transitions: Vec<Transition>,
    episodes: Vec<SegmentEpisode>,
}

impl Worker {
    fn fresh(setup: &TrainSetup, index: usize) -> Result<Worker> {
        let env = TaskEnv::new(
            setup.scene.clone(),
            setup.vehicle.clone(),
            setup.lidar.clone(),
            setup.task.clone(),
        )?;
        let mut rng = stream_rng(setup.seed, 2 + index as u64);
        let mut worker = Worker { env, rng: rng.clone(), obs: Vec::new() };
        let episode_seed = rng.gen();
        worker.rng = rng;
        worker.obs = worker.env.reset(episode_seed).0;
        Ok(worker)
    }

    fn restore(setup: &TrainSetup, snapshot: &WorkerSnapshot) -> Result<Worker> {
        let mut env = TaskEnv::new(
            setup.scene.clone(),
            setup.vehicle.clone(),
            setup.lidar.clone(),
            setup.task.clone(),
        )?;
        let obs = env.restore(snapshot.episode.clone()).0;
        Ok(Worker { env, rng: snapshot.rng.clone(), obs })
    }

    fn snapshot(&self) -> WorkerSnapshot {
        WorkerSnapshot { rng: self.rng.clone(), episode: self.env.episode().clone() }
    }

    fn collect(&mut self, params: &PolicyParams, segment_len: usize) -> SegmentOut {
        let mut out = SegmentOut {
            transitions: Vec::with_capacity(segment_len),
            episodes: Vec::new(),
        };
        for j in 0..segment_len {
            let sample = nn::act(params, &self.obs, &mut self.rng);
            let step = self
                .env
                .step(RawAction::new(sample.action[0], sample.action[1]))
                .expect("worker episode is live");
            // Post-step critic value, before any reset; the TD residual
            // uses it except on termination.
            let bootstrap_value = nn::forward(params, step.observation.as_slice()).value;
            let done = step.terminated || step.truncated;
            out.transitions.push(Transition {
                obs: std::mem::take(&mut self.obs),
                action: sample.action,
                log_prob: sample.log_prob,
                reward: step.reward,
                value: sample.value,
                terminated: step.terminated,
                truncated: step.truncated,
                bootstrap_value,
            });
            if done {
                let ep = self.env.episode();
                out.episodes.push((j, ep.step_count, ep.cumulative_reward));
                let seed = self.rng.gen();
                self.obs = self.env.reset(seed).0;
            } else {
                self.obs = step.observation.0;
            }
        }
        out
    }
}

struct CurveWriter {
    inner: Option<BufWriter<fs::File>>,
}

impl CurveWriter {
    fn create(out_dir: Option<&Path>, append: bool) -> Result<CurveWriter> {
        let Some(dir) = out_dir else {
            return Ok(CurveWriter { inner: None });
        };
        fs::create_dir_all(dir)?;
        let path = dir.join("learning_curve.csv");
        let existed = path.exists();
        let file = fs::OpenOptions::new()
            .create(true)
            .append(append)
            .write(true)
            .truncate(!append)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut w = BufWriter::new(file);
        if !append || !existed {
            writeln!(w, "episode,global_step,steps,episodic_return,moving_avg_return")?;
        }
        Ok(CurveWriter { inner: Some(w) })
    }

    fn record(&mut self, r: &EpisodeRecord) -> Result<()> {
        if let Some(w) = &mut self.inner {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.episode, r.global_step, r.steps, r.episodic_return, r.moving_avg
            )?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(w) = &mut self.inner {
            w.flush()?;
        }
        Ok(())
    }
}

struct TrainState {
    params: PolicyParams,
    optimizer: Optimizer,
    update_rng: ChaCha8Rng,
    workers: Vec<Worker>,
    global_step: u64,
    episode_count: u64,
    recent_returns: VecDeque<f64>,
}

impl TrainState {
    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            global_step: self.global_step,
            episode_count: self.episode_count,
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            update_rng: self.update_rng.clone(),
            workers: self.workers.iter().map(Worker::snapshot).collect(),
            recent_returns: self.recent_returns.iter().copied().collect(),
        }
    }
}

/// Train from a fresh orthogonal initialization.
pub fn train(setup: &TrainSetup) -> Result<TrainResult> {
    setup.hyper.validate()?;
    let arch = Arch::new(setup.lidar.n_rays);
    let mut init_rng = stream_rng(setup.seed, 0);
    let params = PolicyParams::orthogonal_init(arch, &mut init_rng);
    let optimizer = Optimizer::new(setup.hyper.optimizer, setup.hyper.learning_rate, arch.n_params());
    let workers = (0..setup.hyper.n_envs)
        .map(|w| Worker::fresh(setup, w))
        .collect::<Result<Vec<_>>>()?;
    let state = TrainState {
        params,
        optimizer,
        update_rng: stream_rng(setup.seed, 1),
        workers,
        global_step: 0,
        episode_count: 0,
        recent_returns: VecDeque::with_capacity(RETURN_WINDOW),
    };
    let curve = CurveWriter::create(setup.out_dir.as_deref(), false)?;
    run_loop(setup, state, curve)
}

/// Continue a checkpointed run to `setup.hyper.total_steps`.
pub fn resume(setup: &TrainSetup, checkpoint: &Checkpoint) -> Result<TrainResult> {
    setup.hyper.validate()?;
    let arch = Arch::new(setup.lidar.n_rays);
    ensure!(
        checkpoint.params.arch == arch,
        "checkpoint input dim {} does not match configured n_rays {}",
        checkpoint.params.arch.input_dim,
        setup.lidar.n_rays
    );
    ensure!(
        checkpoint.workers.len() == setup.hyper.n_envs,
        "checkpoint has {} workers but config wants n_envs {}",
        checkpoint.workers.len(),
        setup.hyper.n_envs
    );
    if checkpoint.global_step >= setup.hyper.total_steps {
        bail!(
            "checkpoint is already at step {} >= total_steps {}",
            checkpoint.global_step,
            setup.hyper.total_steps
        );
    }
    let workers = checkpoint
        .workers
        .iter()
        .map(|s| Worker::restore(setup, s))
        .collect::<Result<Vec<_>>>()?;
    let state = TrainState {
        params: checkpoint.params.clone(),
        optimizer: checkpoint.optimizer.clone(),
        update_rng: checkpoint.update_rng.clone(),
        workers,
        global_step: checkpoint.global_step,
        episode_count: checkpoint.episode_count,
        recent_returns: checkpoint.recent_returns.iter().copied().collect(),
    };
    let curve = CurveWriter::create(setup.out_dir.as_deref(), true)?;
    run_loop(setup, state, curve)
}

fn run_loop(setup: &TrainSetup, mut state: TrainState, mut curve_out: CurveWriter) -> Result<TrainResult> {
    let hyper = &setup.hyper;
    let segment_len = hyper.rollout_steps / hyper.n_envs;
    let spec = LossSpec {
        clip_eps: hyper.clip_eps,
        vf_coef: hyper.vf_coef,
        ent_coef: hyper.ent_coef,
    };
    let mut pool_builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = setup.threads {
        pool_builder = pool_builder.num_threads(t);
    }
    let pool = pool_builder.build().context("building worker thread pool")?;
    let mut curve = Vec::new();
    let n_envs = hyper.n_envs;

    while state.global_step < hyper.total_steps {
        let params = &state.params;
        let outs: Vec<SegmentOut> = pool.install(|| {
            use rayon::prelude::*;
            state
                .workers
                .par_iter_mut()
                .map(|w| w.collect(params, segment_len))
                .collect()
        });
        let base = state.global_step;
        state.global_step += hyper.rollout_steps as u64;

        // Stamp episode completions with round-robin global step numbers
        // (as if workers stepped in lockstep), then merge in step order.
        let mut finished: Vec<(u64, u64, f64)> = Vec::new();
        for (w, out) in outs.iter().enumerate() {
            for &(j, steps, ret) in &out.episodes {
                finished.push((base + (j * n_envs + w) as u64 + 1, steps, ret));
            }
        }
        finished.sort_unstable_by_key(|&(step, _, _)| step);
        for (global_step, steps, episodic_return) in finished {
            state.episode_count += 1;
            if state.recent_returns.len() == RETURN_WINDOW {
                state.recent_returns.pop_front();
            }
            state.recent_returns.push_back(episodic_return);
            let moving_avg =
                state.recent_returns.iter().sum::<f64>() / state.recent_returns.len() as f64;
            let record = EpisodeRecord {
                episode: state.episode_count,
                global_step,
                steps,
                episodic_return,
                moving_avg,
            };
            curve_out.record(&record)?;
            curve.push(record);
        }
        curve_out.flush()?;

        let mut buffer = RolloutBuffer::from_segments(
            outs.into_iter().map(|o| o.transitions).collect(),
            hyper.gamma,
            hyper.lambda,
        );
        buffer.normalize_advantages();

        let mut indices: Vec<usize> = (0..buffer.len()).collect();
        let mut diag_sum = nn::LossDiagnostics::default();
        let mut diag_count = 0usize;
        for _ in 0..hyper.n_epochs {
            indices.shuffle(&mut state.update_rng);
            for chunk in indices.chunks(hyper.batch_size) {
                let batch = buffer.minibatch(chunk);
                let (mut grad, diag) = nn::backward(&state.params, &batch, &spec)
                    .with_context(|| format!("update at step {}", state.global_step))?;
                clip_global_norm(&mut grad, hyper.max_grad_norm);
                state.optimizer.step(&mut state.params, &grad);
                state.params.clamp_log_std();
                diag_sum.total += diag.total;
                diag_sum.policy_loss += diag.policy_loss;
                diag_sum.value_loss += diag.value_loss;
                diag_sum.entropy += diag.entropy;
                diag_sum.clip_fraction += diag.clip_fraction;
                diag_sum.approx_kl += diag.approx_kl;
                diag_count += 1;
            }
        }

        if hyper.log_interval > 0 && crossed(base, state.global_step, hyper.log_interval) {
            let k = diag_count.max(1) as f64;
            let avg100 = if state.recent_returns.is_empty() {
                f64::NAN
            } else {
                state.recent_returns.iter().sum::<f64>() / state.recent_returns.len() as f64
            };
            println!(
                "step {:>9}/{} episodes {:>6} return(avg{}) {:>10.2} loss {:.4} vf {:.4} clip {:.3} kl {:.5} ent {:.3}",
                state.global_step,
                hyper.total_steps,
                state.episode_count,
                state.recent_returns.len(),
                avg100,
                diag_sum.total / k,
                diag_sum.value_loss / k,
                diag_sum.clip_fraction / k,
                diag_sum.approx_kl / k,
                diag_sum.entropy / k,
            );
        }

        if hyper.checkpoint_interval > 0
            && crossed(base, state.global_step, hyper.checkpoint_interval)
        {
            if let Some(dir) = &setup.out_dir {
                let path = dir
                    .join("checkpoints")
                    .join(format!("ckpt_{:09}.json", state.global_step));
                state.checkpoint().save(&path)?;
            }
        }
    }

    let checkpoint = state.checkpoint();
    if let Some(dir) = &setup.out_dir {
        checkpoint.save(&dir.join("checkpoints").join("final.json"))?;
    }
    Ok(TrainResult { params: state.params, curve, checkpoint })
}

/// Did the step counter cross a multiple of `interval` in (before, after]?
fn crossed(before: u64, after: u64, interval: u64) -> bool {
    before / interval < after / interval
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Vec2};

    fn tiny_scene() -> Scene {
        Scene {
            name: "tiny".into(),
            bounds: Aabb::new(Vec2::new(0.0, -2.0), Vec2::new(30.0, 2.0)),
            open_bounds: false,
            wrap_circles: false,
            start_position: Vec2::new(1.0, 0.0),
            start_yaw: 0.0,
            segments: Vec::new(),
            circles: Vec::new(),
            finish: None,
        }
    }

    fn tiny_setup(total_steps: u64) -> TrainSetup {
        TrainSetup {
            scene: tiny_scene(),
            vehicle: VehicleParams::default(),
            lidar: LidarConfig { n_rays: 9, ..LidarConfig::default() },
            task: TaskOptions { max_episode_steps: 32, ..TaskOptions::default() },
            hyper: Hyperparams {
                total_steps,
                rollout_steps: 64,
                batch_size: 32,
                n_epochs: 2,
                n_envs: 2,
                checkpoint_interval: 0,
                log_interval: 0,
                ..Hyperparams::default()
            },
            seed: 0,
            threads: Some(2),
            out_dir: None,
        }
    }

    #[test]
    fn hyperparams_validate_divisibility() {
        let mut h = Hyperparams::default();
        assert!(h.validate().is_ok());
        h.n_envs = 3;
        assert!(h.validate().unwrap_err().to_string().contains("n_envs"));
        h = Hyperparams { rollout_steps: 100, batch_size: 64, ..Hyperparams::default() };
        assert!(h.validate().unwrap_err().to_string().contains("batch_size"));
    }

    #[test]
    fn ratio_is_one_right_after_sync() {
        // Recomputing log-probs under the collection parameters gives
        // probability ratios of exactly 1 for every stored transition.
        let setup = tiny_setup(64);
        let arch = Arch::new(setup.lidar.n_rays);
        let mut rng = stream_rng(3, 0);
        let params = PolicyParams::orthogonal_init(arch, &mut rng);
        let mut worker = Worker::fresh(&setup, 0).unwrap();
        let out = worker.collect(&params, 48);
        for t in &out.transitions {
            let (lp, _) = nn::log_prob_and_entropy(&params, &t.obs, &t.action);
            let ratio = (lp - t.log_prob).exp();
            assert!((ratio - 1.0).abs() < 1e-6, "{ratio}");
        }
    }

    #[test]
    fn single_sgd_step_with_tiny_lr_does_not_increase_loss() {
        let setup = tiny_setup(64);
        let arch = Arch::new(setup.lidar.n_rays);
        let mut rng = stream_rng(4, 0);
        let params = PolicyParams::orthogonal_init(arch, &mut rng);
        let mut worker = Worker::fresh(&setup, 0).unwrap();
        let out = worker.collect(&params, 64);
        let mut buffer =
            RolloutBuffer::from_segments(vec![out.transitions], 0.99, 0.95);
        buffer.normalize_advantages();
        let all: Vec<usize> = (0..buffer.len()).collect();
        let batch = buffer.minibatch(&all);
        let spec = LossSpec { clip_eps: 0.2, vf_coef: 0.5, ent_coef: 0.0 };
        let (grad, before) = nn::backward(&params, &batch, &spec).unwrap();
        let mut stepped = params.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1e-6, stepped.theta.len());
        opt.step(&mut stepped, &grad);
        let after = nn::loss(&stepped, &batch, &spec).unwrap();
        assert!(
            after.total <= before.total + 1e-12,
            "loss rose from {} to {}",
            before.total,
            after.total
        );
    }

    #[test]
    fn training_runs_and_produces_episodes() {
        let setup = tiny_setup(128);
        let result = train(&setup).unwrap();
        assert_eq!(result.checkpoint.global_step, 128);
        assert!(!result.curve.is_empty(), "32-step cap must finish episodes");
        assert!(result.params.all_finite());
        // Episode numbering is contiguous from 1 and step stamps ascend.
        for (i, rec) in result.curve.iter().enumerate() {
            assert_eq!(rec.episode, i as u64 + 1);
            if i > 0 {
                assert!(rec.global_step > result.curve[i - 1].global_step);
            }
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let setup = tiny_setup(128);
        let a = train(&setup).unwrap();
        let b = train(&setup).unwrap();
        assert_eq!(a.params.theta.len(), b.params.theta.len());
        for (x, y) in a.params.theta.iter().zip(&b.params.theta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut setup = tiny_setup(128);
        setup.hyper.n_envs = 4;
        setup.threads = Some(1);
        let a = train(&setup).unwrap();
        setup.threads = Some(4);
        let b = train(&setup).unwrap();
        for (x, y) in a.params.theta.iter().zip(&b.params.theta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn resume_from_checkpoint_matches_uninterrupted_run() {
        let full = train(&tiny_setup(256)).unwrap();
        let half = train(&tiny_setup(128)).unwrap();
        let resumed = resume(&tiny_setup(256), &half.checkpoint).unwrap();
        for (x, y) in full.params.theta.iter().zip(&resumed.params.theta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(full.checkpoint.episode_count, resumed.checkpoint.episode_count);
        assert_eq!(full.checkpoint.optimizer, resumed.checkpoint.optimizer);
        // The concatenated curves agree too.
        let mut stitched = half.curve.clone();
        stitched.extend(resumed.curve.iter().copied());
        assert_eq!(stitched, full.curve);
    }

    #[test]
    fn checkpoint_json_roundtrip_is_exact() {
        let result = train(&tiny_setup(64)).unwrap();
        let json = serde_json::to_string(&result.checkpoint).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.global_step, result.checkpoint.global_step);
        for (x, y) in result.checkpoint.params.theta.iter().zip(&back.params.theta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(back.optimizer, result.checkpoint.optimizer);
        assert_eq!(back.update_rng, result.checkpoint.update_rng);
    }

    #[test]
    fn resume_rejects_mismatched_shape() {
        let half = train(&tiny_setup(128)).unwrap();
        let mut setup = tiny_setup(256);
        setup.lidar.n_rays = 11;
        let err = resume(&setup, &half.checkpoint).unwrap_err();
        assert!(err.to_string().contains("n_rays"));
    }
}
