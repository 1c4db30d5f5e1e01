//! Shared-trunk actor-critic MLP with exact analytic gradients.
//!
//! Architecture: input -> 64 tanh -> 64 tanh trunk, a 2-unit policy-mean
//! head, a scalar value head, and a state-independent learnable log-std
//! pair. No autodiff: the backward pass is written out by hand and checked
//! against central finite differences (see `selfcheck`).
//!
//! Parameters live in one flat `f64` vector addressed through `Arch`, which
//! keeps the optimizer, gradient clipping, checkpointing, and the
//! finite-difference oracle trivially uniform.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HIDDEN: usize = 64;
pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.8378770664093453;

/// Network shape. Hidden width and action dimension are fixed by the
/// architecture; the input dimension follows the configured ray count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_dim: usize,
}

impl Arch {
    pub fn new(input_dim: usize) -> Self {
        assert!(input_dim >= 1);
        Arch { input_dim }
    }

    pub fn w1(&self) -> Range<usize> {
        0..HIDDEN * self.input_dim
    }
    pub fn b1(&self) -> Range<usize> {
        let s = self.w1().end;
        s..s + HIDDEN
    }
    pub fn w2(&self) -> Range<usize> {
        let s = self.b1().end;
        s..s + HIDDEN * HIDDEN
    }
    pub fn b2(&self) -> Range<usize> {
        let s = self.w2().end;
        s..s + HIDDEN
    }
    pub fn w_policy(&self) -> Range<usize> {
        let s = self.b2().end;
        s..s + ACTION_DIM * HIDDEN
    }
    pub fn b_policy(&self) -> Range<usize> {
        let s = self.w_policy().end;
        s..s + ACTION_DIM
    }
    pub fn w_value(&self) -> Range<usize> {
        let s = self.b_policy().end;
        s..s + HIDDEN
    }
    pub fn b_value(&self) -> Range<usize> {
        let s = self.w_value().end;
        s..s + 1
    }
    pub fn log_std(&self) -> Range<usize> {
        let s = self.b_value().end;
        s..s + ACTION_DIM
    }
    pub fn n_params(&self) -> usize {
        self.log_std().end
    }
}

/// All learnable parameters, flat, 64-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: Arch,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    /// All-zero parameters (log_std 0 too, i.e. unit standard deviation).
    pub fn zeros(arch: Arch) -> Self {
        PolicyParams { arch, theta: vec![0.0; arch.n_params()] }
    }

    /// Orthogonal initialization: gain sqrt(2) for the trunk, 0.01 for the
    /// policy head, 1.0 for the value head; zero biases; log_std 0.
    pub fn orthogonal_init(arch: Arch, rng: &mut impl Rng) -> Self {
        let mut p = PolicyParams::zeros(arch);
        let g = 2.0_f64.sqrt();
        let w1 = orthogonal(HIDDEN, arch.input_dim, g, rng);
        p.theta[arch.w1()].copy_from_slice(&w1);
        let w2 = orthogonal(HIDDEN, HIDDEN, g, rng);
        p.theta[arch.w2()].copy_from_slice(&w2);
        let wp = orthogonal(ACTION_DIM, HIDDEN, 0.01, rng);
        p.theta[arch.w_policy()].copy_from_slice(&wp);
        let wv = orthogonal(1, HIDDEN, 1.0, rng);
        p.theta[arch.w_value()].copy_from_slice(&wv);
        p
    }

    pub fn w1(&self) -> &[f64] {
        &self.theta[self.arch.w1()]
    }
    pub fn b1(&self) -> &[f64] {
        &self.theta[self.arch.b1()]
    }
    pub fn w2(&self) -> &[f64] {
        &self.theta[self.arch.w2()]
    }
    pub fn b2(&self) -> &[f64] {
        &self.theta[self.arch.b2()]
    }
    pub fn w_policy(&self) -> &[f64] {
        &self.theta[self.arch.w_policy()]
    }
    pub fn b_policy(&self) -> &[f64] {
        &self.theta[self.arch.b_policy()]
    }
    pub fn w_value(&self) -> &[f64] {
        &self.theta[self.arch.w_value()]
    }
    pub fn b_value(&self) -> f64 {
        self.theta[self.arch.b_value()][0]
    }
    pub fn log_std(&self) -> [f64; ACTION_DIM] {
        let r = self.arch.log_std();
        [self.theta[r.start], self.theta[r.start + 1]]
    }

    /// Clamp log_std into [LOG_STD_MIN, LOG_STD_MAX]; call after updates.
    pub fn clamp_log_std(&mut self) {
        let r = self.arch.log_std();
        for v in &mut self.theta[r] {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }
}

/// Gradients congruent with `PolicyParams`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub arch: Arch,
    pub g: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros(arch: Arch) -> Self {
        GradientBundle { arch, g: vec![0.0; arch.n_params()] }
    }

    /// Global L2 norm over every parameter gradient.
    pub fn global_norm(&self) -> f64 {
        self.g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Activations needed by both action selection and backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub h1: [f64; HIDDEN],
    pub h2: [f64; HIDDEN],
    pub mean: [f64; ACTION_DIM],
    pub value: f64,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let in_dim = x.len();
    debug_assert_eq!(w.len(), out.len() * in_dim);
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * in_dim..(j + 1) * in_dim];
        let mut acc = b[j];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o = acc;
    }
}

/// Trunk + heads. Panics on an observation length mismatch (caller
/// contract: the observation dimension is fixed by the architecture).
pub fn forward(params: &PolicyParams, obs: &[f64]) -> ForwardCache {
    assert_eq!(
        obs.len(),
        params.arch.input_dim,
        "observation length {} does not match network input {}",
        obs.len(),
        params.arch.input_dim
    );
    let mut h1 = [0.0; HIDDEN];
    affine(params.w1(), params.b1(), obs, &mut h1);
    for v in &mut h1 {
        *v = v.tanh();
    }
    let mut h2 = [0.0; HIDDEN];
    affine(params.w2(), params.b2(), &h1, &mut h2);
    for v in &mut h2 {
        *v = v.tanh();
    }
    let mut mean = [0.0; ACTION_DIM];
    affine(params.w_policy(), params.b_policy(), &h2, &mut mean);
    let mut value_arr = [0.0];
    affine(params.w_value(), &[params.b_value()], &h2, &mut value_arr);
    ForwardCache { h1, h2, mean, value: value_arr[0] }
}

/// Diagonal-Gaussian log density of `action` under (mean, log_std).
pub fn gaussian_log_prob(mean: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM], action: &[f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for d in 0..ACTION_DIM {
        let z = (action[d] - mean[d]) * (-log_std[d]).exp();
        lp += -0.5 * z * z - log_std[d] - 0.5 * LN_2PI;
    }
    lp
}

/// Diagonal-Gaussian entropy: sum over dims of log_std + 0.5*log(2*pi*e).
pub fn gaussian_entropy(log_std: &[f64; ACTION_DIM]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
}

/// One rollout decision from a single forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ActionSample {
    pub action: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub value: f64,
}

/// Draw a pre-clamp action; also report its log probability and the value.
pub fn act(params: &PolicyParams, obs: &[f64], rng: &mut impl Rng) -> ActionSample {
    let cache = forward(params, obs);
    let log_std = params.log_std();
    let mut action = [0.0; ACTION_DIM];
    for d in 0..ACTION_DIM {
        let z: f64 = rng.sample(StandardNormal);
        action[d] = cache.mean[d] + log_std[d].exp() * z;
    }
    let log_prob = gaussian_log_prob(&cache.mean, &log_std, &action);
    ActionSample { action, log_prob, value: cache.value }
}

/// Draw a pre-clamp action and its log probability.
pub fn sample_action(
    params: &PolicyParams,
    obs: &[f64],
    rng: &mut impl Rng,
) -> ([f64; ACTION_DIM], f64) {
    let s = act(params, obs, rng);
    (s.action, s.log_prob)
}

/// Log probability and entropy of a stored action under current params.
pub fn log_prob_and_entropy(params: &PolicyParams, obs: &[f64], action: &[f64; ACTION_DIM]) -> (f64, f64) {
    let cache = forward(params, obs);
    let log_std = params.log_std();
    (gaussian_log_prob(&cache.mean, &log_std, action), gaussian_entropy(&log_std))
}

/// Update minibatch: everything the composite loss needs.
#[derive(Clone, Debug, Default)]
pub struct Minibatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub log_prob_old: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    fn check(&self) {
        let n = self.obs.len();
        assert!(n > 0, "empty minibatch");
        assert_eq!(self.actions.len(), n);
        assert_eq!(self.log_prob_old.len(), n);
        assert_eq!(self.advantages.len(), n);
        assert_eq!(self.value_targets.len(), n);
    }
}

/// Loss coefficients: clip range, value coefficient, entropy coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossDiagnostics {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples with |ratio - 1| > clip_eps.
    pub clip_fraction: f64,
    /// Mean of (ratio - 1) - log(ratio), a nonnegative KL estimator.
    pub approx_kl: f64,
}

#[derive(Debug, Error)]
pub enum LossError {
    #[error("non-finite {term} term in loss (value {value})")]
    NonFinite { term: &'static str, value: f64 },
}

/// Composite clipped-surrogate + value + entropy loss (to MINIMIZE):
/// -mean[min(r*A, clip(r)*A)] + vf_coef*mean[(V - V_target)^2]
/// - ent_coef*entropy, with r = exp(log_prob_new - log_prob_old).
pub fn loss(params: &PolicyParams, batch: &Minibatch, spec: &LossSpec) -> Result<LossDiagnostics, LossError> {
    loss_impl(params, batch, spec, None)
}

/// Loss plus exact analytic gradients of every parameter, with flow from
/// both heads accumulating through the shared trunk.
pub fn backward(
    params: &PolicyParams,
    batch: &Minibatch,
    spec: &LossSpec,
) -> Result<(GradientBundle, LossDiagnostics), LossError> {
    let mut grad = GradientBundle::zeros(params.arch);
    let diag = loss_impl(params, batch, spec, Some(&mut grad.g))?;
    Ok((grad, diag))
}

fn loss_impl(
    params: &PolicyParams,
    batch: &Minibatch,
    spec: &LossSpec,
    mut grad: Option<&mut [f64]>,
) -> Result<LossDiagnostics, LossError> {
    batch.check();
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let arch = params.arch;
    let log_std = params.log_std();
    let entropy = gaussian_entropy(&log_std);

    let mut policy_sum = 0.0;
    let mut value_sum = 0.0;
    let mut clip_count = 0usize;
    let mut kl_sum = 0.0;

    for i in 0..n {
        let obs = &batch.obs[i];
        let action = &batch.actions[i];
        let adv = batch.advantages[i];
        let cache = forward(params, obs);

        let mut z = [0.0; ACTION_DIM];
        let mut lp_new = 0.0;
        for d in 0..ACTION_DIM {
            z[d] = (action[d] - cache.mean[d]) * (-log_std[d]).exp();
            lp_new += -0.5 * z[d] * z[d] - log_std[d] - 0.5 * LN_2PI;
        }
        let ratio = (lp_new - batch.log_prob_old[i]).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - spec.clip_eps, 1.0 + spec.clip_eps) * adv;
        // Ties take the unclipped branch; a tie means the ratio is inside
        // the clip interval where both branches have identical derivative.
        let take_unclipped = unclipped <= clipped;
        policy_sum += -unclipped.min(clipped);
        if (ratio - 1.0).abs() > spec.clip_eps {
            clip_count += 1;
        }
        kl_sum += (ratio - 1.0) - (lp_new - batch.log_prob_old[i]);

        let v_err = cache.value - batch.value_targets[i];
        value_sum += v_err * v_err;

        let Some(g) = grad.as_deref_mut() else {
            continue;
        };

        // d(total)/d(log_prob_new) for this sample.
        let g_lp = if take_unclipped { -adv * ratio * inv_n } else { 0.0 };
        // d(total)/d(value) for this sample.
        let g_v = spec.vf_coef * 2.0 * v_err * inv_n;

        let mut d_mean = [0.0; ACTION_DIM];
        for d in 0..ACTION_DIM {
            let sigma_inv = (-log_std[d]).exp();
            // d(lp)/d(mean_d) = z_d / sigma_d; d(lp)/d(log_std_d) = z_d^2 - 1.
            d_mean[d] = g_lp * z[d] * sigma_inv;
            g[arch.log_std()][d] += g_lp * (z[d] * z[d] - 1.0) - spec.ent_coef * inv_n;
        }

        // Heads into the shared trunk.
        let mut d_h2 = [0.0; HIDDEN];
        let wp = params.w_policy();
        for d in 0..ACTION_DIM {
            let row = &wp[d * HIDDEN..(d + 1) * HIDDEN];
            for j in 0..HIDDEN {
                d_h2[j] += row[j] * d_mean[d];
            }
        }
        let wv = params.w_value();
        for j in 0..HIDDEN {
            d_h2[j] += wv[j] * g_v;
        }
        {
            let gp = &mut g[arch.w_policy()];
            for d in 0..ACTION_DIM {
                for j in 0..HIDDEN {
                    gp[d * HIDDEN + j] += d_mean[d] * cache.h2[j];
                }
            }
        }
        {
            let gbp = &mut g[arch.b_policy()];
            for d in 0..ACTION_DIM {
                gbp[d] += d_mean[d];
            }
        }
        {
            let gv = &mut g[arch.w_value()];
            for j in 0..HIDDEN {
                gv[j] += g_v * cache.h2[j];
            }
        }
        g[arch.b_value()][0] += g_v;

        // Through tanh of layer 2.
        let mut d_z2 = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            d_z2[j] = d_h2[j] * (1.0 - cache.h2[j] * cache.h2[j]);
        }
        {
            let g2 = &mut g[arch.w2()];
            for j in 0..HIDDEN {
                let row = &mut g2[j * HIDDEN..(j + 1) * HIDDEN];
                for k in 0..HIDDEN {
                    row[k] += d_z2[j] * cache.h1[k];
                }
            }
        }
        {
            let gb2 = &mut g[arch.b2()];
            for j in 0..HIDDEN {
                gb2[j] += d_z2[j];
            }
        }

        // Through tanh of layer 1.
        let w2 = params.w2();
        let mut d_h1 = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            let row = &w2[j * HIDDEN..(j + 1) * HIDDEN];
            for k in 0..HIDDEN {
                d_h1[k] += row[k] * d_z2[j];
            }
        }
        let mut d_z1 = [0.0; HIDDEN];
        for k in 0..HIDDEN {
            d_z1[k] = d_h1[k] * (1.0 - cache.h1[k] * cache.h1[k]);
        }
        {
            let in_dim = arch.input_dim;
            let g1 = &mut g[arch.w1()];
            for k in 0..HIDDEN {
                let row = &mut g1[k * in_dim..(k + 1) * in_dim];
                for (m, ob) in obs.iter().enumerate() {
                    row[m] += d_z1[k] * ob;
                }
            }
        }
        {
            let gb1 = &mut g[arch.b1()];
            for k in 0..HIDDEN {
                gb1[k] += d_z1[k];
            }
        }
    }

    let policy_loss = policy_sum * inv_n;
    let value_loss = value_sum * inv_n;
    let total = policy_loss + spec.vf_coef * value_loss - spec.ent_coef * entropy;

    for (term, value) in [
        ("policy", policy_loss),
        ("value", value_loss),
        ("entropy", entropy),
        ("total", total),
    ] {
        if !value.is_finite() {
            return Err(LossError::NonFinite { term, value });
        }
    }

    Ok(LossDiagnostics {
        total,
        policy_loss,
        value_loss,
        entropy,
        clip_fraction: clip_count as f64 * inv_n,
        approx_kl: kl_sum * inv_n,
    })
}

/// Row-major (rows x cols) matrix with orthonormal rows (if rows <= cols)
/// or columns (if rows >= cols), scaled by `gain`. Modified Gram-Schmidt
/// with one re-orthogonalization pass on a standard-normal draw.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    let transpose = rows < cols;
    let (m, k) = if transpose { (cols, rows) } else { (rows, cols) };
    // Tall m x k factor, orthonormal columns.
    let mut a: Vec<f64> = (0..m * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    for j in 0..k {
        for _ in 0..2 {
            for prev in 0..j {
                let mut dot = 0.0;
                for i in 0..m {
                    dot += a[i * k + prev] * a[i * k + j];
                }
                for i in 0..m {
                    a[i * k + j] -= dot * a[i * k + prev];
                }
            }
        }
        let mut norm_sq = 0.0;
        for i in 0..m {
            norm_sq += a[i * k + j] * a[i * k + j];
        }
        let inv = 1.0 / norm_sq.sqrt();
        for i in 0..m {
            a[i * k + j] *= inv;
        }
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = if transpose { a[c * k + r] } else { a[r * k + c] };
            w[r * cols + c] = gain * v;
        }
    }
    w
}
