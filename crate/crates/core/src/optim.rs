use serde::{Deserialize, Serialize};

use crate::nn::ParamSet;
use crate::scalar::Scalar;
use crate::tensor::ShapeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// Adam with bias-corrected moments. Owns its moment buffers; one state
/// per parameter set.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub t: u64,
    pub m: ParamSet<T>,
    pub v: ParamSet<T>,
    pub cfg: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, cfg: AdamConfig) -> Self {
        Self {
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
            cfg,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<(), ShapeError> {
        let shapes_match = params.layers.len() == grads.layers.len()
            && params.tensors().count() == grads.tensors().count()
            && params
                .tensors()
                .zip(grads.tensors())
                .zip(self.m.tensors())
                .all(|((p, g), m)| p.shape() == g.shape() && p.shape() == m.shape());
        if !shapes_match {
            return Err(ShapeError::new("adam: parameter/gradient shapes differ"));
        }
        self.t += 1;
        let c = self.cfg;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let one = T::one();
        let bc1 = T::of(1.0 - c.beta1.powi(self.t as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.t as i32));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        let tensors = params
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            let iter = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((theta, &g), (m, v)) in iter {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerParams;
    use crate::tensor::Tensor;

    fn single(w: Vec<f64>) -> ParamSet<f64> {
        let n = w.len();
        ParamSet {
            layers: vec![Some(LayerParams {
                weight: Tensor::from_vec(&[n], w).unwrap(),
                bias: Tensor::zeros(&[1]),
            })],
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = single(vec![0.5, -1.0]);
        let g = p.zeros_like();
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut p, &g).unwrap();
        }
        assert_eq!(p, single(vec![0.5, -1.0]));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = single(vec![0.0, 0.0, 0.0]);
        let mut g = p.zeros_like();
        g.layers[0].as_mut().unwrap().weight =
            Tensor::from_vec(&[3], vec![1e-3, -5.0, 5.0]).unwrap();
        let cfg = AdamConfig::default();
        let mut adam = AdamState::new(&p, cfg);
        adam.step(&mut p, &g).unwrap();
        let w = p.layers[0].as_ref().unwrap().weight.data().to_vec();
        assert!((w[0] + cfg.lr).abs() < 1e-6);
        assert!((w[1] - cfg.lr).abs() < 1e-9);
        assert!((w[2] + cfg.lr).abs() < 1e-9);
        assert_eq!(w[1], -w[2]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = single(vec![0.0, 0.0]);
        let g = single(vec![0.0]);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        assert!(adam.step(&mut p, &g).is_err());
    }
}
