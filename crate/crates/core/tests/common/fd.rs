#![allow(dead_code)]

//! Central-difference gradient checks in f64.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadwatch_core::nn::layers::*;
use roadwatch_core::nn::{init_params, network_backward, network_forward, LayerSpec, Mode, NetworkSpec, ParamSet};
use roadwatch_core::rng::{stream, Purpose};
use roadwatch_core::tensor::Tensor;

pub type T64 = Tensor<f64>;

pub const H: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> T64 {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn dot(a: &T64, b: &T64) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Central differences of `f` with respect to every element of `x`.
pub fn numeric_grad(x: &T64, h: f64, mut f: impl FnMut(&T64) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.clone();
            p.data_mut()[i] += h;
            let mut m = x.clone();
            m.data_mut()[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Worst relative error over input, weight and bias gradients.
pub fn conv_error() -> f64 {
    let mut r = rng(1);
    let x = rand_tensor(&[6, 5, 3], &mut r);
    let w = rand_tensor(&[3, 3, 3, 4], &mut r);
    let b = rand_tensor(&[4], &mut r);
    let probe = rand_tensor(&[4, 3, 4], &mut r);
    let g = conv2d_backward(&x, &w, &probe).unwrap();
    let loss = |x: &T64, w: &T64, b: &T64| dot(&conv2d_forward(x, w, b).unwrap(), &probe);
    let ex = max_rel_err(g.grad_x.data(), &numeric_grad(&x, H, |x| loss(x, &w, &b)));
    let ew = max_rel_err(g.grad_w.data(), &numeric_grad(&w, H, |w| loss(&x, w, &b)));
    let eb = max_rel_err(g.grad_b.data(), &numeric_grad(&b, H, |b| loss(&x, &w, b)));
    ex.max(ew).max(eb)
}

pub fn dense_error() -> f64 {
    let mut r = rng(2);
    let x = rand_tensor(&[7], &mut r);
    let w = rand_tensor(&[7, 5], &mut r);
    let b = rand_tensor(&[5], &mut r);
    let probe = rand_tensor(&[5], &mut r);
    let g = dense_backward(&x, &w, &probe).unwrap();
    let loss = |x: &T64, w: &T64, b: &T64| dot(&dense_forward(x, w, b).unwrap(), &probe);
    let ex = max_rel_err(g.grad_x.data(), &numeric_grad(&x, H, |x| loss(x, &w, &b)));
    let ew = max_rel_err(g.grad_w.data(), &numeric_grad(&w, H, |w| loss(&x, w, &b)));
    let eb = max_rel_err(g.grad_b.data(), &numeric_grad(&b, H, |b| loss(&x, &w, b)));
    ex.max(ew).max(eb)
}

/// 6x6x2 input of distinct values spaced well beyond `H`, so no
/// perturbation flips a pooling max or crosses the ReLU kink.
fn spaced_input(r: &mut ChaCha8Rng) -> T64 {
    let mut vals: Vec<f64> = (0..6 * 6 * 2).map(|i| i as f64 * 0.01 - 0.355).collect();
    for i in (1..vals.len()).rev() {
        vals.swap(i, r.random_range(0..=i));
    }
    Tensor::from_vec(&[6, 6, 2], vals).unwrap()
}

pub fn pool_error() -> f64 {
    let mut r = rng(3);
    let x = spaced_input(&mut r);
    let probe = rand_tensor(&[3, 3, 2], &mut r);
    let (_, arg) = maxpool2_forward(&x).unwrap();
    let g = maxpool_backward(x.shape(), &arg, &probe).unwrap();
    max_rel_err(g.data(), &numeric_grad(&x, H, |x| dot(&maxpool2_forward(x).unwrap().0, &probe)))
}

pub fn relu_error() -> f64 {
    let mut r = rng(14);
    let x = spaced_input(&mut r);
    let probe = rand_tensor(&[6, 6, 2], &mut r);
    let g = relu_backward(&x, &probe).unwrap();
    max_rel_err(g.data(), &numeric_grad(&x, H, |x| dot(&relu_forward(x), &probe)))
}

pub fn sigmoid_error() -> f64 {
    let mut r = rng(15);
    let x = rand_tensor(&[6, 6, 2], &mut r).map(|v| 4.0 * v);
    let probe = rand_tensor(&[6, 6, 2], &mut r);
    let g = sigmoid_backward(&sigmoid_forward(&x), &probe).unwrap();
    max_rel_err(g.data(), &numeric_grad(&x, H, |x| dot(&sigmoid_forward(x), &probe)))
}

pub fn flatten_error() -> f64 {
    let mut r = rng(16);
    let x = rand_tensor(&[3, 4, 2], &mut r);
    let probe = rand_tensor(&[24], &mut r);
    let g = flatten_backward(x.shape(), &probe).unwrap();
    max_rel_err(g.data(), &numeric_grad(&x, H, |x| dot(&flatten_forward(x), &probe)))
}

pub fn dropout_error() -> f64 {
    let mut r = rng(4);
    let x = rand_tensor(&[20], &mut r);
    let probe = rand_tensor(&[20], &mut r);
    let (_, mask) = dropout_forward(&x, 0.5, &mut stream(9, Purpose::Dropout, 0), true);
    let g = dropout_backward(&mask, &probe).unwrap();
    let n = numeric_grad(&x, H, |x| {
        dot(&dropout_forward(x, 0.5, &mut stream(9, Purpose::Dropout, 0), true).0, &probe)
    });
    max_rel_err(g.data(), &n)
}

/// Every layer kind, each as (name, worst relative error).
pub fn layer_errors() -> Vec<(&'static str, f64)> {
    vec![
        ("conv2d", conv_error()),
        ("dense", dense_error()),
        ("maxpool", pool_error()),
        ("relu", relu_error()),
        ("sigmoid", sigmoid_error()),
        ("flatten", flatten_error()),
        ("dropout", dropout_error()),
    ]
}

/// The full layer sequence at 12x12x3 with narrow widths.
pub fn reduced_spec() -> NetworkSpec {
    NetworkSpec {
        input_shape: [12, 12, 3],
        layers: vec![
            LayerSpec::conv3x3(4),
            LayerSpec::Relu,
            LayerSpec::maxpool2(),
            LayerSpec::conv3x3(4),
            LayerSpec::Relu,
            LayerSpec::maxpool2(),
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 8 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense { units: 1 },
            LayerSpec::Sigmoid,
        ],
    }
}

/// Checks d(sum of outputs)/d(every parameter) for a 2-sample batch in
/// train mode; returns (worst relative error, parameter count).
pub fn network_error() -> (f64, usize) {
    let spec = reduced_spec();
    let params: ParamSet<f64> = init_params(&spec, 5).unwrap();
    let mut r = rng(6);
    let batch = rand_tensor(&[2, 12, 12, 3], &mut r);
    let mode = Mode::Train { dropout_seed: 11 };
    let depth = spec.layers.len();
    let loss = |p: &ParamSet<f64>| -> f64 {
        let (y, _) = network_forward(&spec, p, &batch, depth, mode).unwrap();
        y.data().iter().sum()
    };
    let (y, cache) = network_forward(&spec, &params, &batch, depth, mode).unwrap();
    let grads = network_backward(&spec, &params, &cache, &Tensor::filled(y.shape(), 1.0)).unwrap();

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for t in 0..params.tensors().count() {
        let len = params.tensors().nth(t).unwrap().len();
        for i in 0..len {
            let mut p = params.clone();
            p.tensors_mut().nth(t).unwrap().data_mut()[i] += H;
            let mut m = params.clone();
            m.tensors_mut().nth(t).unwrap().data_mut()[i] -= H;
            numeric.push((loss(&p) - loss(&m)) / (2.0 * H));
            analytic.push(grads.tensors().nth(t).unwrap().data()[i]);
        }
    }
    assert!(analytic.iter().any(|g| g.abs() > 1e-6));
    (max_rel_err(&analytic, &numeric), analytic.len())
}
