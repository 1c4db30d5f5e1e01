//! First-order optimizers over the flat parameter vector, plus global
//! gradient-norm clipping. State serializes so checkpoints resume
//! bit-exactly.

use serde::{Deserialize, Serialize};

use crate::nn::{GradientBundle, PolicyParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// First-moment estimate (Adam only; empty for SGD).
    pub m: Vec<f64>,
    /// Second-moment estimate (Adam only; empty for SGD).
    pub v: Vec<f64>,
    /// Completed update count, for bias correction.
    pub t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        assert!(lr > 0.0 && lr.is_finite());
        let (m, v) = match kind {
            OptimizerKind::Adam => (vec![0.0; n_params], vec![0.0; n_params]),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Optimizer { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m, v, t: 0 }
    }

    /// One descent step on the total loss (gradients point uphill).
    pub fn step(&mut self, params: &mut PolicyParams, grad: &GradientBundle) {
        assert_eq!(grad.g.len(), params.theta.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.theta.iter_mut().zip(&grad.g) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - self.beta1.powi(self.t as i32);
                let bc2 = 1.0 - self.beta2.powi(self.t as i32);
                for i in 0..params.theta.len() {
                    let g = grad.g[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params.theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
    }
}

/// Scale the gradient so its global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grad: &mut GradientBundle, max_norm: f64) -> f64 {
    assert!(max_norm > 0.0);
    let norm = grad.global_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in &mut grad.g {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Arch;

    fn tiny() -> (PolicyParams, GradientBundle) {
        let arch = Arch::new(2);
        (PolicyParams::zeros(arch), GradientBundle::zeros(arch))
    }

    #[test]
    fn sgd_step_is_exact() {
        let (mut p, mut g) = tiny();
        g.g[0] = 0.5;
        g.g[7] = -2.0;
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, p.theta.len());
        opt.step(&mut p, &g);
        assert_eq!(p.theta[0].to_bits(), (-0.05_f64).to_bits());
        assert_eq!(p.theta[7].to_bits(), 0.2_f64.to_bits());
        assert!(p.theta[1] == 0.0);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        // With zero state, m_hat = g and v_hat = g^2, so the first update is
        // lr * g / (|g| + eps), essentially lr * sign(g).
        let (mut p, mut g) = tiny();
        g.g[0] = 3.0;
        g.g[1] = -0.004;
        let lr = 1e-3;
        let mut opt = Optimizer::new(OptimizerKind::Adam, lr, p.theta.len());
        opt.step(&mut p, &g);
        assert!((p.theta[0] + lr).abs() < 1e-8, "{}", p.theta[0]);
        assert!((p.theta[1] - lr).abs() < 1e-5, "{}", p.theta[1]);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn adam_moments_match_hand_computation() {
        let (mut p, mut g) = tiny();
        g.g[0] = 2.0;
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, p.theta.len());
        opt.step(&mut p, &g);
        opt.step(&mut p, &g);
        // m after two identical gradients: (1 - b1^2) * g via geometric sum.
        let m_expect = (1.0 - 0.9) * 2.0 + 0.9 * (1.0 - 0.9) * 2.0;
        let v_expect = (1.0 - 0.999) * 4.0 + 0.999 * (1.0 - 0.999) * 4.0;
        assert!((opt.m[0] - m_expect).abs() < 1e-15);
        assert!((opt.v[0] - v_expect).abs() < 1e-15);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // Minimize sum (theta_i - c_i)^2 for a handful of coordinates.
        let (mut p, mut g) = tiny();
        let targets = [1.5, -0.25, 0.75];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05, p.theta.len());
        for _ in 0..2000 {
            for (k, c) in targets.iter().enumerate() {
                g.g[k] = 2.0 * (p.theta[k] - c);
            }
            opt.step(&mut p, &g);
        }
        for (k, c) in targets.iter().enumerate() {
            assert!((p.theta[k] - c).abs() < 1e-3, "theta[{k}] = {}", p.theta[k]);
        }
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let (_, mut g) = tiny();
        g.g[0] = 3.0;
        g.g[1] = 4.0; // norm 5
        let pre = clip_global_norm(&mut g, 0.5);
        assert_eq!(pre, 5.0);
        assert!((g.global_norm() - 0.5).abs() < 1e-15);
        assert!((g.g[0] - 0.3).abs() < 1e-15);

        let mut small = GradientBundle::zeros(Arch::new(2));
        small.g[0] = 0.1;
        let before = small.g[0].to_bits();
        let pre = clip_global_norm(&mut small, 0.5);
        assert_eq!(pre, 0.1);
        assert_eq!(small.g[0].to_bits(), before);
    }

    #[test]
    fn optimizer_state_roundtrips_through_json() {
        let (mut p, mut g) = tiny();
        for (i, v) in g.g.iter_mut().enumerate() {
            *v = (i as f64 * 0.7).sin();
        }
        let mut opt = Optimizer::new(OptimizerKind::Adam, 3e-4, p.theta.len());
        opt.step(&mut p, &g);
        opt.step(&mut p, &g);
        let json = serde_json::to_string(&opt).unwrap();
        let back: Optimizer = serde_json::from_str(&json).unwrap();
        assert_eq!(opt, back);
        // Continued updates agree bitwise.
        let mut a = opt.clone();
        let mut b = back;
        let mut pa = p.clone();
        let mut pb = p.clone();
        a.step(&mut pa, &g);
        b.step(&mut pb, &g);
        for (x, y) in pa.theta.iter().zip(&pb.theta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
