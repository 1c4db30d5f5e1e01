//! depthnav command-line interface: training, evaluation, numerical
//! self-checks, scene validation, and trajectory replay.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use depthnav::config::{threads_from_env, ControllerChoice, RunConfig};
use depthnav::env::TaskEnv;
use depthnav::eval::{
    evaluate, policy_from_checkpoint, read_trace, replay_check, Agent, EvalOptions,
};
use depthnav::nn;
use depthnav::pid::PidController;
use depthnav::ppo::{self, Checkpoint, TrainSetup};
use depthnav::scene::{load_scene_with_footprint, Scene};
use depthnav::selfcheck;

#[derive(Parser)]
#[command(
    name = "depthnav",
    version,
    about = "2D LiDAR racing simulator: PPO training, PID baseline, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy as described by a run configuration.
    Train {
        config: PathBuf,
        /// Continue from a previously written checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a policy checkpoint and/or the PID baseline.
    Eval {
        config: PathBuf,
        /// Policy weights; overrides the config's checkpoint path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Act with the policy mean instead of sampling.
        #[arg(long)]
        deterministic: bool,
        /// Override the configured controller.
        #[arg(long, value_enum)]
        controller: Option<CliController>,
        /// Upper bound on the throttle action during evaluation.
        #[arg(long)]
        throttle_cap: Option<f64>,
        /// Override the config's evaluation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate on a different scene than the config names.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Numerical self-checks against independent oracles.
    Selfcheck {
        #[command(subcommand)]
        kind: SelfcheckCmd,
    },
    /// Scene-file tools.
    Scene {
        #[command(subcommand)]
        cmd: SceneCmd,
    },
    /// Re-simulate a recorded trajectory and verify state consistency.
    Replay {
        trajectory: PathBuf,
        /// Run configuration for the environment the trace came from;
        /// discovered next to the trace when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliController {
    Policy,
    Pid,
    /// Policy and PID back to back, one report block each.
    Both,
    /// Constant stationary action; degenerate reference.
    Null,
}

#[derive(Subcommand)]
enum SelfcheckCmd {
    /// Analytic loss gradient vs central finite differences.
    Grad {
        #[arg(long, default_value_t = selfcheck::DEFAULT_GRAD_SEED)]
        seed: u64,
    },
    /// Closed-form ray casting vs marching plus bisection.
    Raycast {
        #[arg(long, default_value_t = selfcheck::DEFAULT_RAYCAST_SEED)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Parse and validate a scene file, then print a summary.
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, resume } => cmd_train(&config, resume.as_deref()),
        Command::Eval {
            config,
            checkpoint,
            episodes,
            deterministic,
            controller,
            throttle_cap,
            seed,
            scene,
        } => cmd_eval(EvalArgs {
            config,
            checkpoint,
            episodes,
            deterministic,
            controller,
            throttle_cap,
            seed,
            scene,
        }),
        Command::Selfcheck { kind } => match kind {
            SelfcheckCmd::Grad { seed } => cmd_selfcheck_grad(seed),
            SelfcheckCmd::Raycast { seed } => cmd_selfcheck_raycast(seed),
        },
        Command::Scene { cmd } => match cmd {
            SceneCmd::Validate { path } => cmd_scene_validate(&path),
        },
        Command::Replay { trajectory, config } => cmd_replay(&trajectory, config.as_deref()),
    }
}

fn build_env(config: &RunConfig, scene: Scene) -> Result<TaskEnv> {
    TaskEnv::new(scene, config.vehicle, config.lidar, config.task)
}

fn load_scene_for(config: &RunConfig, path: &Path) -> Result<Scene> {
    let scene = load_scene_with_footprint(path, config.task.footprint_radius)
        .with_context(|| format!("loading scene {}", path.display()))?;
    Ok(scene)
}

fn cmd_train(config_path: &Path, resume: Option<&Path>) -> Result<ExitCode> {
    let config = RunConfig::load(config_path)?;
    let scene = load_scene_for(&config, &config.scene)?;
    let out_dir = config.out_dir.clone();
    config.save(&out_dir.join("run_config.toml"))?;
    let setup = TrainSetup {
        scene,
        vehicle: config.vehicle,
        lidar: config.lidar,
        task: config.task,
        hyper: config.hyperparams,
        seed: config.seed,
        threads: threads_from_env()?,
        out_dir: Some(out_dir.clone()),
    };
    let start = Instant::now();
    let result = match resume {
        None => ppo::train(&setup)?,
        Some(path) => {
            let checkpoint = Checkpoint::load(path)?;
            ppo::resume(&setup, &checkpoint)?
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let steps = result.checkpoint.global_step;
    println!(
        "trained to {steps} steps in {elapsed:.1}s ({:.0} steps/s), {} episodes",
        steps as f64 / elapsed.max(1e-9),
        result.checkpoint.episode_count
    );
    if let Some(last) = result.curve.last() {
        println!("moving average return: {:.3}", last.moving_avg);
    }
    println!("checkpoint: {}", out_dir.join("checkpoints").join("final.json").display());
    println!("learning curve: {}", out_dir.join("learning_curve.csv").display());
    Ok(ExitCode::SUCCESS)
}

struct EvalArgs {
    config: PathBuf,
    checkpoint: Option<PathBuf>,
    episodes: usize,
    deterministic: bool,
    controller: Option<CliController>,
    throttle_cap: Option<f64>,
    seed: Option<u64>,
    scene: Option<PathBuf>,
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let mut config = RunConfig::load(&args.config)?;
    // Fold CLI overrides into the config so the provenance copy written
    // to the output directory describes what actually ran.
    if let Some(scene) = args.scene {
        config.scene = scene;
    }
    if let Some(checkpoint) = args.checkpoint {
        config.checkpoint = Some(checkpoint);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let controller = args.controller.unwrap_or(match config.controller {
        ControllerChoice::Policy => CliController::Policy,
        ControllerChoice::Pid => CliController::Pid,
    });
    let out_dir = config.out_dir.clone();
    config.save(&out_dir.join("eval_config.toml"))?;
    let scene = load_scene_for(&config, &config.scene)?;
    let mut env = build_env(&config, scene)?;

    let mut agents: Vec<Agent> = Vec::new();
    if matches!(controller, CliController::Policy | CliController::Both) {
        let path = config
            .checkpoint
            .clone()
            .context("policy evaluation needs a checkpoint (--checkpoint or config field)")?;
        let checkpoint = Checkpoint::load(&path)?;
        let params = policy_from_checkpoint(&checkpoint, env.obs_dim())?;
        report_inference_latency(&params, &mut env, config.seed);
        agents.push(Agent::policy(params, args.deterministic, config.seed));
    }
    if matches!(controller, CliController::Pid | CliController::Both) {
        agents.push(Agent::Pid(PidController::new(
            config.pid,
            env.lidar_config(),
            config.vehicle.t_s,
        )?));
    }
    if controller == CliController::Null {
        agents.push(Agent::stationary());
    }

    let opts = EvalOptions {
        episodes: args.episodes,
        seed: config.seed,
        traces_dir: Some(out_dir.join("traces")),
        throttle_cap: args.throttle_cap,
    };
    let mut blocks = Vec::new();
    for agent in &mut agents {
        let start = Instant::now();
        let report = evaluate(&mut env, agent, &opts)?;
        let elapsed = start.elapsed().as_secs_f64();
        let steps: u64 = report.episodes.iter().map(|e| e.steps).sum();
        println!(
            "[{}] {} episodes, {steps} steps, {:.0} steps/s",
            report.label,
            report.episodes.len(),
            steps as f64 / elapsed.max(1e-9)
        );
        print!("{}", report.summary_text());
        blocks.push(report);
    }
    if let [a, b] = blocks.as_slice() {
        if let (Some(ta), Some(tb)) = (a.mean_lap_time(), b.mean_lap_time()) {
            println!("mean lap time ratio {}/{}: {:.3}", a.label, b.label, ta / tb);
        }
    }
    let text: Vec<String> = blocks.iter().map(|b| b.summary_text()).collect();
    let report_path = out_dir.join("eval_report.txt");
    fs::write(&report_path, text.join("\n"))
        .with_context(|| format!("writing {}", report_path.display()))?;
    println!("report: {}", report_path.display());
    println!("traces: {}", out_dir.join("traces").display());
    Ok(ExitCode::SUCCESS)
}

/// The host-side answer to embedded CPU-budget questions: microseconds
/// per policy decision, measured on the live observation. Printed, not
/// written to report files, so run outputs stay byte-reproducible.
fn report_inference_latency(params: &nn::PolicyParams, env: &mut TaskEnv, seed: u64) {
    let obs = env.reset(seed);
    let reps = 1000u32;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(nn::forward(params, obs.as_slice()));
    }
    let micros = start.elapsed().as_secs_f64() / reps as f64 * 1e6;
    println!("policy inference: {micros:.1} us/decision on this host");
}

fn cmd_selfcheck_grad(seed: u64) -> Result<ExitCode> {
    let report = selfcheck::grad_check(seed);
    println!(
        "gradient check: {} instances, {} parameters compared",
        report.instances, report.parameters_checked
    );
    println!(
        "max relative error: {:.3e} (tolerance {:.0e})",
        report.max_rel_error, report.tolerance
    );
    Ok(verdict(report.passed()))
}

fn cmd_selfcheck_raycast(seed: u64) -> Result<ExitCode> {
    let report = selfcheck::raycast_check(seed);
    println!("ray-cast check: {} rays against the marching oracle", report.rays);
    println!(
        "max absolute error: {:.3e} m (tolerance {:.0e}), hit-flag mismatches: {}",
        report.max_abs_error, report.tolerance, report.flag_mismatches
    );
    Ok(verdict(report.passed()))
}

fn verdict(passed: bool) -> ExitCode {
    if passed {
        println!("PASS");
        ExitCode::SUCCESS
    } else {
        println!("FAIL");
        ExitCode::FAILURE
    }
}

fn cmd_scene_validate(path: &Path) -> Result<ExitCode> {
    let scene = load_scene_with_footprint(path, depthnav::scene::DEFAULT_FOOTPRINT_RADIUS)
        .with_context(|| format!("validating {}", path.display()))?;
    println!("{}: ok", path.display());
    println!(
        "name: {}  bounds: {:.1} x {:.1} m ({})",
        scene.name,
        scene.bounds.width(),
        scene.bounds.height(),
        if scene.open_bounds { "open" } else { "walled" }
    );
    println!(
        "start: ({}, {}) yaw {}  segments: {}  circles: {}  finish line: {}",
        scene.start_position.x,
        scene.start_position.y,
        scene.start_yaw,
        scene.segments.len(),
        scene.circles.len(),
        if scene.finish.is_some() { "yes" } else { "no" }
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(trajectory: &Path, config: Option<&Path>) -> Result<ExitCode> {
    let config_path = match config {
        Some(p) => p.to_path_buf(),
        None => find_config_near(trajectory)?,
    };
    let config = RunConfig::load(&config_path)?;
    let scene = load_scene_for(&config, &config.scene)?;
    let mut env = build_env(&config, scene)?;
    let rows = read_trace(trajectory)?;
    let report = replay_check(&mut env, &rows)?;
    println!("replayed {} steps against {}", report.steps, config_path.display());
    println!(
        "max state error: {:.3e}  max reward error: {:.3e}",
        report.max_state_error, report.max_reward_error
    );
    if report.consistent() {
        println!("CONSISTENT");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("INCONSISTENT");
        Ok(ExitCode::FAILURE)
    }
}

/// Traces land in `<out_dir>/traces/`, next to the run's provenance
/// config; look there before demanding an explicit flag.
fn find_config_near(trace: &Path) -> Result<PathBuf> {
    let mut dirs = Vec::new();
    if let Some(parent) = trace.parent() {
        dirs.push(parent.to_path_buf());
        if let Some(grandparent) = parent.parent() {
            dirs.push(grandparent.to_path_buf());
        }
    }
    for dir in &dirs {
        for name in ["eval_config.toml", "run_config.toml"] {
            let candidate = dir.join(name);
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    bail!(
        "no eval_config.toml or run_config.toml found near {}; pass --config",
        trace.display()
    )
}
