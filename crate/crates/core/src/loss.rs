//! Binary losses on logits.

use serde::{Deserialize, Serialize};

use crate::nn::layers::sigmoid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    /// Weight of the positive term; the negative term gets `1 - alpha`.
    pub alpha: f64,
    /// Focusing exponent.
    pub gamma: f64,
    /// Probabilities are clamped to `[epsilon, 1 - epsilon]`.
    pub epsilon: f64,
}

impl Default for FocalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
            epsilon: 1e-7,
        }
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Sigmoid focal cross-entropy of one logit against target `y` (0 or 1, or
/// a smoothed value in between). Returns `(loss, d loss / d z)`.
///
/// With `p = sigmoid(z)` clamped to `[eps, 1 - eps]`:
/// `loss = -alpha*y*(1-p)^gamma*ln p - (1-alpha)*(1-y)*p^gamma*ln(1-p)`.
/// Inside the clamp region the logs are evaluated as softplus of the
/// logit; when the clamp is active the gradient is zero.
pub fn sigmoid_focal_ce<T: Scalar>(z: T, y: T, cfg: &FocalConfig) -> (T, T) {
    let one = T::one();
    let eps = T::of(cfg.epsilon);
    let alpha = T::of(cfg.alpha);
    let gamma = T::of(cfg.gamma);
    let raw = sigmoid(z);
    let clamped = raw < eps || raw > one - eps;
    let p = raw.max(eps).min(one - eps);
    let q = one - p;
    let (log_p, log_q) = if clamped {
        (p.ln(), q.ln())
    } else {
        (-softplus(-z), -softplus(z))
    };
    let pos = alpha * y;
    let neg = (one - alpha) * (one - y);
    let q_g = q.powf(gamma);
    let p_g = p.powf(gamma);
    let loss = -pos * q_g * log_p - neg * p_g * log_q;
    if clamped {
        return (loss, T::zero());
    }
    // d/dz with dp/dz = p q folded in to avoid negative powers.
    let d_pos = -pos * (q_g * q - gamma * q_g * p * log_p);
    let d_neg = -neg * (gamma * p_g * q * log_q - p_g * p);
    (loss, d_pos + d_neg)
}

/// Mean focal loss over a batch and the per-sample gradient of that mean.
pub fn focal_batch<T: Scalar>(logits: &[T], targets: &[T], cfg: &FocalConfig) -> (T, Vec<T>) {
    mean_loss(logits, targets, |z, y| sigmoid_focal_ce(z, y, cfg))
}

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logits<T: Scalar>(z: T, y: T) -> (T, T) {
    let loss = z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
    (loss, sigmoid(z) - y)
}

pub fn bce_batch<T: Scalar>(logits: &[T], targets: &[T]) -> (T, Vec<T>) {
    mean_loss(logits, targets, bce_with_logits)
}

fn mean_loss<T: Scalar>(logits: &[T], targets: &[T], f: impl Fn(T, T) -> (T, T)) -> (T, Vec<T>) {
    assert_eq!(logits.len(), targets.len(), "one target per logit");
    if logits.is_empty() {
        return (T::zero(), Vec::new());
    }
    let n = T::of(logits.len() as f64);
    let mut total = T::zero();
    let grads = logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| {
            let (l, g) = f(z, y);
            total += l;
            g / n
        })
        .collect();
    (total / n, grads)
}

/// `y * (1 - eps) + eps / 2`.
pub fn label_smooth<T: Scalar>(y: T, eps: T) -> T {
    y * (T::one() - eps) + eps / T::of(2.0)
}
