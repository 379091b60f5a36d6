use super::layers::*;
use super::{LayerSpec, NetworkSpec, ParamSet};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active; sample `i` of a batch draws its mask from stream
    /// `i` of `dropout_seed`.
    Train { dropout_seed: u64 },
}

enum Aux<T> {
    None,
    Argmax(Vec<usize>),
    Mask(Tensor<T>),
}

/// Per-layer inputs (and pooling/dropout bookkeeping) of one sample.
pub struct SampleCache<T> {
    inputs: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
    output: Tensor<T>,
}

impl<T: Scalar> SampleCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    pub fn depth(&self) -> usize {
        self.inputs.len()
    }
}

fn params_of<T>(params: &ParamSet<T>, i: usize) -> Result<&super::LayerParams<T>, ShapeError> {
    params.layers.get(i).and_then(Option::as_ref).ok_or_else(|| {
        ShapeError::new(format!("layer {i} has no parameters"))
    })
}

/// Runs the first `depth` layers of `spec` on a single `H x W x C` sample.
pub fn forward_sample<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    x: &Tensor<T>,
    depth: usize,
    mode: Mode,
    sample_index: u64,
) -> Result<SampleCache<T>, ShapeError> {
    if x.shape() != spec.input_shape {
        return Err(ShapeError::new(format!(
            "input {:?} does not match network input {:?}",
            x.shape(),
            spec.input_shape
        )));
    }
    let mut rng = match mode {
        Mode::Train { dropout_seed } => Some(stream(dropout_seed, Purpose::Dropout, sample_index)),
        Mode::Eval => None,
    };
    let mut inputs = Vec::with_capacity(depth);
    let mut aux = Vec::with_capacity(depth);
    let mut cur = x.clone();
    for (i, layer) in spec.layers.iter().take(depth).enumerate() {
        let (next, a) = match *layer {
            LayerSpec::Conv2D { .. } => {
                let p = params_of(params, i)?;
                (conv2d_forward(&cur, &p.weight, &p.bias)?, Aux::None)
            }
            LayerSpec::MaxPool { pool } => {
                let (y, idx) = maxpool_forward(&cur, pool)?;
                (y, Aux::Argmax(idx))
            }
            LayerSpec::Relu => (relu_forward(&cur), Aux::None),
            LayerSpec::Flatten => (flatten_forward(&cur), Aux::None),
            LayerSpec::Dense { .. } => {
                let p = params_of(params, i)?;
                (dense_forward(&cur, &p.weight, &p.bias)?, Aux::None)
            }
            LayerSpec::Dropout { rate } => match rng.as_mut() {
                Some(rng) => {
                    let (y, mask) = dropout_forward(&cur, rate, rng, true);
                    (y, Aux::Mask(mask))
                }
                None => (cur.clone(), Aux::None),
            },
            LayerSpec::Sigmoid => (sigmoid_forward(&cur), Aux::None),
        };
        inputs.push(std::mem::replace(&mut cur, next));
        aux.push(a);
    }
    Ok(SampleCache {
        inputs,
        aux,
        output: cur,
    })
}

/// Gradients of every parameter for one sample, given dL/d(output).
pub fn backward_sample<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    cache: &SampleCache<T>,
    grad_out: &Tensor<T>,
) -> Result<ParamSet<T>, ShapeError> {
    if grad_out.shape() != cache.output.shape() {
        return Err(ShapeError::new(format!(
            "grad_out {:?} vs output {:?}",
            grad_out.shape(),
            cache.output.shape()
        )));
    }
    let mut grads = params.zeros_like();
    let mut g = grad_out.clone();
    for i in (0..cache.depth()).rev() {
        let x = &cache.inputs[i];
        g = match spec.layers[i] {
            LayerSpec::Conv2D { .. } => {
                let p = params_of(params, i)?;
                let cg = conv2d_backward(x, &p.weight, &g)?;
                let slot = grads.layers[i].as_mut().expect("mirrors params");
                slot.weight = cg.grad_w;
                slot.bias = cg.grad_b;
                cg.grad_x
            }
            LayerSpec::MaxPool { .. } => match &cache.aux[i] {
                Aux::Argmax(idx) => maxpool_backward(x.shape(), idx, &g)?,
                _ => unreachable!("maxpool caches argmax"),
            },
            LayerSpec::Relu => relu_backward(x, &g)?,
            LayerSpec::Flatten => flatten_backward(x.shape(), &g)?,
            LayerSpec::Dense { .. } => {
                let p = params_of(params, i)?;
                let dg = dense_backward(x, &p.weight, &g)?;
                let slot = grads.layers[i].as_mut().expect("mirrors params");
                slot.weight = dg.grad_w;
                slot.bias = dg.grad_b;
                dg.grad_x
            }
            LayerSpec::Dropout { .. } => match &cache.aux[i] {
                Aux::Mask(mask) => dropout_backward(mask, &g)?,
                _ => g,
            },
            LayerSpec::Sigmoid => {
                let y = if i + 1 < cache.depth() {
                    &cache.inputs[i + 1]
                } else {
                    &cache.output
                };
                sigmoid_backward(y, &g)?
            }
        };
    }
    Ok(grads)
}

pub struct BatchCache<T> {
    pub samples: Vec<SampleCache<T>>,
}

/// Forward over an `N x H x W x C` batch. Returns `N x out` outputs.
pub fn network_forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    batch: &Tensor<T>,
    depth: usize,
    mode: Mode,
) -> Result<(Tensor<T>, BatchCache<T>), ShapeError> {
    if batch.shape().len() != 4 || batch.shape()[1..] != spec.input_shape {
        return Err(ShapeError::new(format!(
            "batch {:?} does not match N x {:?}",
            batch.shape(),
            spec.input_shape
        )));
    }
    let n = batch.shape()[0];
    let samples = (0..n)
        .map(|i| forward_sample(spec, params, &batch.sample(i), depth, mode, i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs: Vec<_> = samples.iter().map(|c| c.output.clone()).collect();
    Ok((Tensor::stack(&outputs)?, BatchCache { samples }))
}

/// Sum of per-sample gradients, reduced in sample-index order.
pub fn network_backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamSet<T>,
    cache: &BatchCache<T>,
    grad_out: &Tensor<T>,
) -> Result<ParamSet<T>, ShapeError> {
    if grad_out.shape().first() != Some(&cache.samples.len()) {
        return Err(ShapeError::new(format!(
            "grad_out {:?} for a batch of {}",
            grad_out.shape(),
            cache.samples.len()
        )));
    }
    let mut total = params.zeros_like();
    for (i, sample) in cache.samples.iter().enumerate() {
        let g = backward_sample(spec, params, sample, &grad_out.sample(i))?;
        total.add_assign(&g)?;
    }
    Ok(total)
}
