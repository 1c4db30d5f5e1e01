//! Built-in verification oracles, independent of the implementations they
//! check: a central finite-difference gradient checker for the composite
//! loss, and a marching + bisection ray-cast cross-check. Both are runtime
//! modules (exposed through the CLI) and are also frozen into tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Segment, Vec2};
use crate::nn::{self, Arch, LossSpec, Minibatch, PolicyParams};
use crate::scene::{self, Scene};

/// Central-difference step. 1e-5 balances truncation against round-off for
/// 64-bit floats at the loss magnitudes seen here.
pub const FD_STEP: f64 = 1e-5;
/// Absolute floor: entries whose analytic/finite-difference disagreement
/// is below this are accepted outright. Near-zero gradients disagree by
/// central-difference cancellation noise (~1e-11 at these loss scales),
/// where the relative measure is meaningless; a genuinely wrong term shows
/// an absolute gap orders of magnitude above this floor.
pub const FD_ABS_FLOOR: f64 = 1e-7;
/// Gradient check passes below this max relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Ray-cast check passes below this max absolute distance error (meters)
/// with full hit-flag agreement.
pub const RAYCAST_TOLERANCE: f64 = 1e-3;
/// Marching step of the brute-force ray oracle, meters.
pub const MARCH_STEP: f64 = 1e-4;

pub const DEFAULT_GRAD_SEED: u64 = 7;
pub const DEFAULT_RAYCAST_SEED: u64 = 11;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    pub instances: usize,
    pub parameters_checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RaycastCheckReport {
    pub rays: usize,
    pub max_abs_error: f64,
    pub flag_mismatches: usize,
    pub tolerance: f64,
}

impl RaycastCheckReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error < self.tolerance && self.flag_mismatches == 0
    }
}

/// Worst relative error between `analytic` and central finite differences
/// of the total loss, over every parameter. Disagreements below
/// `FD_ABS_FLOOR` pass the absolute floor and are skipped.
pub fn max_relative_grad_error(
    params: &PolicyParams,
    batch: &Minibatch,
    spec: &LossSpec,
    analytic: &[f64],
) -> f64 {
    assert_eq!(analytic.len(), params.arch.n_params());
    let mut probe = params.clone();
    let mut worst = 0.0_f64;
    for i in 0..probe.theta.len() {
        let orig = probe.theta[i];
        probe.theta[i] = orig + FD_STEP;
        let plus = nn::loss(&probe, batch, spec).expect("finite loss").total;
        probe.theta[i] = orig - FD_STEP;
        let minus = nn::loss(&probe, batch, spec).expect("finite loss").total;
        probe.theta[i] = orig;
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let ga = analytic[i];
        let diff = (ga - fd).abs();
        if diff <= FD_ABS_FLOOR {
            continue;
        }
        worst = worst.max(diff / ga.abs().max(fd.abs()));
    }
    worst
}

/// Random (params, minibatch) instance with old log-probs from a jittered
/// parameter copy, so probability ratios spread around 1 and both clip
/// branches occur.
fn random_instance(input_dim: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> (PolicyParams, Minibatch) {
    let arch = Arch::new(input_dim);
    let mut params = PolicyParams::orthogonal_init(arch, rng);
    for r in [arch.b1(), arch.b2(), arch.b_policy(), arch.b_value(), arch.log_std()] {
        for v in &mut params.theta[r] {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut old = params.clone();
    for v in &mut old.theta {
        *v += 0.05 * rng.sample::<f64, _>(StandardNormal);
    }
    let mut batch = Minibatch::default();
    for _ in 0..batch_size {
        let obs: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let (action, _) = nn::sample_action(&params, &obs, rng);
        let (lp_old, _) = nn::log_prob_and_entropy(&old, &obs, &action);
        let value = nn::forward(&params, &obs).value;
        batch.obs.push(obs);
        batch.actions.push(action);
        batch.log_prob_old.push(lp_old);
        batch.advantages.push(rng.sample::<f64, _>(StandardNormal));
        batch.value_targets.push(value + rng.sample::<f64, _>(StandardNormal));
    }
    (params, batch)
}

/// Gradient check over 20 small-input instances plus 2 at the full default
/// observation width. The composite loss is piecewise smooth; the fixed
/// default seed keeps every sampled ratio away from the clip kinks where
/// finite differences are undefined.
pub fn grad_check(seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = LossSpec { clip_eps: 0.2, vf_coef: 0.5, ent_coef: 0.01 };
    let mut worst = 0.0_f64;
    let mut instances = 0;
    let mut parameters = 0;
    let mut run = |input_dim: usize, rng: &mut ChaCha8Rng| {
        let (params, batch) = random_instance(input_dim, 4, rng);
        let (grad, _) = nn::backward(&params, &batch, &spec).expect("finite loss");
        parameters += grad.g.len();
        worst = worst.max(max_relative_grad_error(&params, &batch, &spec, &grad.g));
        instances += 1;
    };
    for _ in 0..20 {
        let dim = rng.gen_range(2..=8);
        run(dim, &mut rng);
    }
    for _ in 0..2 {
        run(170, &mut rng);
    }
    GradCheckReport {
        instances,
        parameters_checked: parameters,
        max_rel_error: worst,
        tolerance: GRAD_TOLERANCE,
    }
}

/// Brute-force ray cast: march along the ray in `MARCH_STEP` increments,
/// watch every primitive's implicit sign function for a crossing, and
/// refine the earliest crossing by bisection. Shares no geometry code with
/// the closed-form implementation.
pub fn marching_ray_cast(scene: &Scene, origin: Vec2, dir: Vec2, r_max: f64, time: f64) -> (f64, bool) {
    let segments: Vec<Segment> = scene.effective_segments().collect();
    let circles: Vec<(Vec2, f64)> = scene
        .circles
        .iter()
        .map(|c| (scene.circle_center(c, time), c.radius))
        .collect();

    let point = |t: f64| origin + dir * t;
    // Side of the segment's infinite line; a hit flips the sign while the
    // projection parameter lies in [0, 1].
    let seg_side = |t: f64, s: &Segment| (s.b - s.a).cross(point(t) - s.a);
    let circ_level = |t: f64, c: &(Vec2, f64)| (point(t) - c.0).norm_sq() - c.1 * c.1;

    let mut seg_prev: Vec<f64> = segments.iter().map(|s| seg_side(0.0, s)).collect();
    let mut circ_prev: Vec<f64> = circles.iter().map(|c| circ_level(0.0, c)).collect();

    let steps = (r_max / MARCH_STEP).ceil() as u64;
    let mut t_prev = 0.0;
    for k in 1..=steps {
        let t = (k as f64 * MARCH_STEP).min(r_max);
        let mut best: Option<f64> = None;
        for (i, s) in segments.iter().enumerate() {
            let g = seg_side(t, s);
            if (g < 0.0) != (seg_prev[i] < 0.0) {
                let root = bisect(|x| seg_side(x, s), t_prev, t);
                let e = s.b - s.a;
                let proj = (point(root) - s.a).dot(e) / e.norm_sq();
                if (0.0..=1.0).contains(&proj) {
                    best = Some(best.map_or(root, |b: f64| b.min(root)));
                }
            }
            seg_prev[i] = g;
        }
        for (i, c) in circles.iter().enumerate() {
            let g = circ_level(t, c);
            if (g < 0.0) != (circ_prev[i] < 0.0) {
                let root = bisect(|x| circ_level(x, c), t_prev, t);
                best = Some(best.map_or(root, |b: f64| b.min(root)));
            }
            circ_prev[i] = g;
        }
        if let Some(d) = best {
            return (d, true);
        }
        t_prev = t;
    }
    (r_max, false)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let lo_negative = f(lo) < 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn random_check_scene(rng: &mut ChaCha8Rng) -> Scene {
    let half = rng.gen_range(3.0..8.0);
    let mut scene = Scene::parse(&format!(
        "bounds {h} {h} {half} {half}\nstart 0 0 0\n",
        h = -half,
        half = half
    ))
    .expect("generated scene parses");
    scene.open_bounds = rng.gen_bool(0.5);
    scene.wrap_circles = rng.gen_bool(0.5);
    let n_segments = rng.gen_range(0..=10);
    for _ in 0..n_segments {
        let a = Vec2::new(rng.gen_range(-half..half), rng.gen_range(-half..half));
        let b = Vec2::new(rng.gen_range(-half..half), rng.gen_range(-half..half));
        if (b - a).norm_sq() > 1e-6 {
            scene.segments.push(Segment::new(a, b));
        }
    }
    let n_circles = rng.gen_range(0..=5);
    for _ in 0..n_circles {
        let center = Vec2::new(rng.gen_range(-half..half), rng.gen_range(-half..half));
        let radius = rng.gen_range(0.1..1.5);
        let velocity = if rng.gen_bool(0.5) {
            Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            Vec2::ZERO
        };
        scene.circles.push(crate::geometry::CircleObstacle { center, radius, velocity });
    }
    scene
}

/// Closed-form vs marching oracle over 1,000 random scene/ray pairs.
pub fn raycast_check(seed: u64) -> RaycastCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_abs_error = 0.0_f64;
    let mut flag_mismatches = 0;
    let rays = 1000;
    for _ in 0..rays {
        let scene = random_check_scene(&mut rng);
        let origin = Vec2::new(
            rng.gen_range(scene.bounds.min.x * 0.9..scene.bounds.max.x * 0.9),
            rng.gen_range(scene.bounds.min.y * 0.9..scene.bounds.max.y * 0.9),
        );
        let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let dir = Vec2::new(angle.cos(), angle.sin());
        let r_max = rng.gen_range(2.0..12.0);
        let time = rng.gen_range(0.0..10.0);
        let (closed, closed_hit) = scene::ray_cast(&scene, origin, dir, r_max, time);
        let (marched, marched_hit) = marching_ray_cast(&scene, origin, dir, r_max, time);
        if closed_hit != marched_hit {
            flag_mismatches += 1;
        }
        max_abs_error = max_abs_error.max((closed - marched).abs());
    }
    RaycastCheckReport {
        rays,
        max_abs_error,
        flag_mismatches,
        tolerance: RAYCAST_TOLERANCE,
    }
}
