//! Rollout storage and generalized advantage estimation.
//!
//! Advantages are computed per worker segment with the standard backward
//! recursion. The lambda-chain breaks at any episode end; the one-step
//! TD residual bootstraps the stored critic value of the post-step
//! observation except on termination, where the next value is zero. The
//! final transition of a segment bootstraps the same way, so advantages
//! never leak across reset boundaries or update boundaries.

use serde::{Deserialize, Serialize};

use crate::nn::{Minibatch, ACTION_DIM};

/// One environment step as stored for the update phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub reward: f64,
    /// Critic value of `obs` under the rollout-time parameters.
    pub value: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Critic value of the post-step observation (before any reset).
    /// Ignored when `terminated`; the TD residual uses zero there.
    pub bootstrap_value: f64,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Recursive GAE over one worker segment. Returns per-transition
/// advantages; value targets are `advantage + value` (pre-normalization).
pub fn compute_gae(segment: &[Transition], gamma: f64, lambda: f64) -> Vec<f64> {
    let mut advantages = vec![0.0; segment.len()];
    let mut carry = 0.0;
    for (i, t) in segment.iter().enumerate().rev() {
        let next_value = if t.terminated { 0.0 } else { t.bootstrap_value };
        let delta = t.reward + gamma * next_value - t.value;
        carry = if t.done() { delta } else { delta + gamma * lambda * carry };
        advantages[i] = carry;
    }
    advantages
}

/// Merged rollout across workers, ready for minibatching.
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

impl RolloutBuffer {
    /// Merge worker segments in worker order, running GAE per segment.
    pub fn from_segments(segments: Vec<Vec<Transition>>, gamma: f64, lambda: f64) -> Self {
        let mut buf = RolloutBuffer::default();
        for segment in segments {
            let adv = compute_gae(&segment, gamma, lambda);
            for (t, a) in segment.into_iter().zip(adv) {
                buf.value_targets.push(a + t.value);
                buf.advantages.push(a);
                buf.transitions.push(t);
            }
        }
        buf
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Normalize advantages to zero mean, unit standard deviation across
    /// the whole rollout. Value targets are already fixed and unaffected.
    /// Degenerate (near-constant) advantages are centered only.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n == 0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std < 1e-12 {
            for a in &mut self.advantages {
                *a -= mean;
            }
            return;
        }
        for a in &mut self.advantages {
            *a = (*a - mean) / std;
        }
    }

    /// Gather a minibatch by transition index.
    pub fn minibatch(&self, indices: &[usize]) -> Minibatch {
        let mut batch = Minibatch::default();
        for &i in indices {
            let t = &self.transitions[i];
            batch.obs.push(t.obs.clone());
            batch.actions.push(t.action);
            batch.log_prob_old.push(t.log_prob);
            batch.advantages.push(self.advantages[i]);
            batch.value_targets.push(self.value_targets[i]);
        }
        batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn transition(reward: f64, value: f64, terminated: bool, truncated: bool, bootstrap: f64) -> Transition {
        Transition {
            obs: vec![0.0],
            action: [0.0; ACTION_DIM],
            log_prob: 0.0,
            reward,
            value,
            terminated,
            truncated,
            bootstrap_value: bootstrap,
        }
    }

    /// Direct nested-sum GAE definition: advantage at t is the
    /// (gamma*lambda)-weighted sum of TD residuals from t forward, stopping
    /// at (and including) the first episode end. Independent of the
    /// recursion under test.
    fn direct_sum_gae(segment: &[Transition], gamma: f64, lambda: f64) -> Vec<f64> {
        let deltas: Vec<f64> = segment
            .iter()
            .map(|t| {
                let next = if t.terminated { 0.0 } else { t.bootstrap_value };
                t.reward + gamma * next - t.value
            })
            .collect();
        (0..segment.len())
            .map(|t| {
                let mut acc = 0.0;
                let mut w = 1.0;
                for l in t..segment.len() {
                    acc += w * deltas[l];
                    if segment[l].done() {
                        break;
                    }
                    w *= gamma * lambda;
                }
                acc
            })
            .collect()
    }

    fn random_segment(len: usize, rng: &mut ChaCha8Rng) -> Vec<Transition> {
        (0..len)
            .map(|_| {
                let terminated = rng.gen_bool(0.15);
                let truncated = !terminated && rng.gen_bool(0.1);
                transition(
                    rng.gen_range(-2.0..5.0),
                    rng.gen_range(-1.0..1.0),
                    terminated,
                    truncated,
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn single_terminated_transition() {
        // r = 1, V = 0, terminated: advantage 1, target 1.
        let seg = vec![transition(1.0, 0.0, true, false, 0.7)];
        let adv = compute_gae(&seg, 0.99, 0.95);
        assert_eq!(adv, vec![1.0]);
        let buf = RolloutBuffer::from_segments(vec![seg], 0.99, 0.95);
        assert_eq!(buf.value_targets, vec![1.0]);
    }

    #[test]
    fn segment_end_bootstraps_stored_value() {
        // No done flags: the last delta uses the stored post-step value.
        let seg = vec![transition(1.0, 0.5, false, false, 2.0)];
        let adv = compute_gae(&seg, 0.99, 0.95);
        assert!((adv[0] - (1.0 + 0.99 * 2.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn truncation_bootstraps_termination_does_not() {
        let gamma = 0.9;
        let truncated = vec![transition(1.0, 0.0, false, true, 3.0)];
        let terminated = vec![transition(1.0, 0.0, true, false, 3.0)];
        assert!((compute_gae(&truncated, gamma, 0.95)[0] - (1.0 + gamma * 3.0)).abs() < 1e-15);
        assert!((compute_gae(&terminated, gamma, 0.95)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chain_breaks_at_episode_end() {
        // Step 0 truncates; step 1 starts a new episode. Advantage at 0
        // must not include step 1's delta.
        let seg = vec![
            transition(1.0, 0.2, false, true, 0.5),
            transition(2.0, 0.1, false, false, 0.3),
        ];
        let gamma = 0.99;
        let adv = compute_gae(&seg, gamma, 0.95);
        assert!((adv[0] - (1.0 + gamma * 0.5 - 0.2)).abs() < 1e-15);
        assert!((adv[1] - (2.0 + gamma * 0.3 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn lambda_zero_gives_one_step_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seg = random_segment(32, &mut rng);
        let adv = compute_gae(&seg, 0.99, 0.0);
        for (a, t) in adv.iter().zip(&seg) {
            let next = if t.terminated { 0.0 } else { t.bootstrap_value };
            let delta = t.reward + 0.99 * next - t.value;
            assert!((a - delta).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_one_gives_discounted_delta_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seg: Vec<Transition> = (0..24)
            .map(|_| {
                transition(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), false, false, rng.gen_range(-1.0..1.0))
            })
            .collect();
        let gamma = 0.97;
        let adv = compute_gae(&seg, gamma, 1.0);
        let deltas: Vec<f64> = seg
            .iter()
            .map(|t| t.reward + gamma * t.bootstrap_value - t.value)
            .collect();
        for t in 0..seg.len() {
            let direct: f64 = (t..seg.len()).map(|l| gamma.powi((l - t) as i32) * deltas[l]).sum();
            assert!((adv[t] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn recursion_matches_direct_sum_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let len = rng.gen_range(1..=64);
            let seg = random_segment(len, &mut rng);
            let gamma = rng.gen_range(0.5..1.0);
            let lambda = rng.gen_range(0.0..1.0);
            let fast = compute_gae(&seg, gamma, lambda);
            let slow = direct_sum_gae(&seg, gamma, lambda);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn normalization_hits_zero_mean_unit_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seg = random_segment(256, &mut rng);
        let mut buf = RolloutBuffer::from_segments(vec![seg], 0.99, 0.95);
        buf.normalize_advantages();
        let n = buf.advantages.len() as f64;
        let mean = buf.advantages.iter().sum::<f64>() / n;
        let var = buf.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-10, "{mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-8, "{}", var.sqrt());
    }

    #[test]
    fn degenerate_advantages_center_without_blowup() {
        let seg = vec![transition(1.0, 0.0, true, false, 0.0); 8];
        let mut buf = RolloutBuffer::from_segments(vec![seg], 0.99, 0.95);
        buf.normalize_advantages();
        assert!(buf.advantages.iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn merge_keeps_worker_order_and_targets() {
        let s0 = vec![transition(1.0, 0.25, true, false, 0.0)];
        let s1 = vec![transition(2.0, 0.5, true, false, 0.0)];
        let buf = RolloutBuffer::from_segments(vec![s0, s1], 0.99, 0.95);
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.transitions[0].reward, 1.0);
        assert_eq!(buf.transitions[1].reward, 2.0);
        // target = advantage + value = (r - V) + V = r for terminal steps.
        assert!((buf.value_targets[0] - 1.0).abs() < 1e-15);
        assert!((buf.value_targets[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn minibatch_gathers_by_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seg = random_segment(16, &mut rng);
        let buf = RolloutBuffer::from_segments(vec![seg], 0.99, 0.95);
        let batch = buf.minibatch(&[3, 11, 7]);
        assert_eq!(batch.len(), 3);
        assert_eq!(batch.log_prob_old[1], buf.transitions[11].log_prob);
        assert_eq!(batch.advantages[2], buf.advantages[7]);
        assert_eq!(batch.value_targets[0], buf.value_targets[3]);
    }
}
