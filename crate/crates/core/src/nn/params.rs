use rand::Rng as _;

use super::{LayerSpec, NetworkSpec};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Weights and biases per layer; `None` for parameter-free layers.
///
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self, ShapeError> {
        let inputs = spec.input_shapes()?;
        let layers = spec
            .layers
            .iter()
            .zip(&inputs)
            .map(|(layer, input)| {
                layer.param_shapes(input).map(|(w, b)| LayerParams {
                    weight: Tensor::zeros(&w),
                    bias: Tensor::zeros(&b),
                })
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weight: Tensor::zeros(p.weight.shape()),
                        bias: Tensor::zeros(p.bias.shape()),
                    })
                })
                .collect(),
        }
    }

    /// Parameter tensors in storage order: layer order, weight before bias.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|p| [&p.weight, &p.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flatten()
            .flat_map(|p| [&mut p.weight, &mut p.bias])
    }

    pub fn count(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), ShapeError> {
        if self.layers.len() != other.layers.len() {
            return Err(ShapeError::new("parameter sets have different depth"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (Some(a), Some(b)) => {
                    a.weight.add_assign(&b.weight)?;
                    a.bias.add_assign(&b.bias)?;
                }
                (None, None) => {}
                _ => return Err(ShapeError::new("parameter sets have different layout")),
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weight: p.weight.cast(),
                        bias: p.bias.cast(),
                    })
                })
                .collect(),
        }
    }

    /// Checks every tensor against the shapes `spec` implies.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<(), ShapeError> {
        let expected = Self::zeros(spec)?;
        if expected.layers.len() != self.layers.len() {
            return Err(ShapeError::new(format!(
                "{} parameter slots for {} layers",
                self.layers.len(),
                expected.layers.len()
            )));
        }
        for (i, (e, p)) in expected.layers.iter().zip(&self.layers).enumerate() {
            let ok = match (e, p) {
                (Some(e), Some(p)) => {
                    e.weight.shape() == p.weight.shape() && e.bias.shape() == p.bias.shape()
                }
                (None, None) => true,
                _ => false,
            };
            if !ok {
                return Err(ShapeError::new(format!("layer {i} parameters do not match spec")));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform limit `sqrt(6 / (fan_in + fan_out))` for a
/// parameterised layer with the given weight shape.
pub fn glorot_limit(layer: &LayerSpec, weight_shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match (layer, weight_shape) {
        (LayerSpec::Conv2D { .. }, &[k1, k2, cin, cout]) => (k1 * k2 * cin, k1 * k2 * cout),
        (_, &[n, units]) => (n, units),
        _ => unreachable!("weight shape {weight_shape:?} for {layer:?}"),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights in the open interval (-a, a), zero biases. Each
/// layer draws from its own stream so the result depends only on `seed`.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<ParamSet<T>, ShapeError> {
    let mut params = ParamSet::<T>::zeros(spec)?;
    for (i, (layer, slot)) in spec.layers.iter().zip(&mut params.layers).enumerate() {
        let Some(p) = slot else { continue };
        let limit = glorot_limit(layer, p.weight.shape());
        let mut rng = stream(seed, Purpose::Init, i as u64);
        for w in p.weight.data_mut() {
            *w = loop {
                let v = T::of((rng.random::<f64>() * 2.0 - 1.0) * limit);
                if v.as_f64().abs() < limit {
                    break v;
                }
            };
        }
    }
    Ok(params)
}
