//! Per-layer kernels. Images are `H x W x C`, conv weights
//! `k x k x Cin x Cout`, dense weights `in x out`; all row-major.

use rand::Rng as _;

use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

fn dims3<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<[usize; 3], ShapeError> {
    match *t.shape() {
        [a, b, c] => Ok([a, b, c]),
        ref s => Err(ShapeError::new(format!("{what}: expected rank 3, got {s:?}"))),
    }
}

fn conv_dims<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
) -> Result<([usize; 3], usize, usize), ShapeError> {
    let [h, wd, cin] = dims3(x, "conv2d input")?;
    let (k, cout) = match *w.shape() {
        [k1, k2, c, o] if k1 == k2 && c == cin => (k1, o),
        ref s => {
            return Err(ShapeError::new(format!(
                "conv2d weight {s:?} incompatible with input {:?}",
                x.shape()
            )))
        }
    };
    if let Some(b) = b.filter(|b| b.shape() != [cout]) {
        return Err(ShapeError::new(format!(
            "conv2d bias {:?} vs {cout} filters",
            b.shape()
        )));
    }
    if h < k || wd < k {
        return Err(ShapeError::new(format!(
            "conv2d kernel {k} larger than input {h}x{wd}"
        )));
    }
    Ok(([h, wd, cin], k, cout))
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Valid cross-correlation, stride 1.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, ShapeError> {
    let ([h, wd, cin], k, cout) = conv_dims(x, w, Some(b))?;
    let (oh, ow) = (h - k + 1, wd - k + 1);
    let (xd, wdat, bias) = (x.data(), w.data(), b.data());
    let patch = k * cin;
    let mut out = vec![T::zero(); oh * ow * cout];
    for i in 0..oh {
        for j in 0..ow {
            let o = &mut out[(i * ow + j) * cout..][..cout];
            o.copy_from_slice(bias);
            for u in 0..k {
                // k*cin contiguous inputs starting at (i+u, j)
                let xs = &xd[((i + u) * wd + j) * cin..][..patch];
                let ws = &wdat[u * patch * cout..][..patch * cout];
                for (t, &xv) in xs.iter().enumerate() {
                    axpy(o, xv, &ws[t * cout..][..cout]);
                }
            }
        }
    }
    Tensor::from_vec(&[oh, ow, cout], out)
}

pub struct ConvGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Tensor<T>,
    pub grad_b: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>, ShapeError> {
    let ([h, wd, cin], k, cout) = conv_dims(x, w, None)?;
    let (oh, ow) = (h - k + 1, wd - k + 1);
    if grad_out.shape() != [oh, ow, cout] {
        return Err(ShapeError::new(format!(
            "conv2d grad_out {:?}, expected {:?}",
            grad_out.shape(),
            [oh, ow, cout]
        )));
    }
    let (xd, wdat, g) = (x.data(), w.data(), grad_out.data());
    let patch = k * cin;
    let mut gx = vec![T::zero(); x.len()];
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = vec![T::zero(); cout];
    for i in 0..oh {
        for j in 0..ow {
            let go = &g[(i * ow + j) * cout..][..cout];
            for (acc, &v) in gb.iter_mut().zip(go) {
                *acc += v;
            }
            for u in 0..k {
                let xoff = ((i + u) * wd + j) * cin;
                let woff = u * patch * cout;
                for t in 0..patch {
                    let wrow = woff + t * cout;
                    axpy(&mut gw[wrow..wrow + cout], xd[xoff + t], go);
                    gx[xoff + t] += dot(&wdat[wrow..wrow + cout], go);
                }
            }
        }
    }
    Ok(ConvGrads {
        grad_x: Tensor::from_vec(x.shape(), gx)?,
        grad_w: Tensor::from_vec(w.shape(), gw)?,
        grad_b: Tensor::from_vec(&[cout], gb)?,
    })
}

/// Max pooling with window = stride = `pool`. Trailing rows/columns that do
/// not fill a window are dropped. Returns the pooled tensor and, for each
/// output element, the flat input index of the winner (first maximum in
/// row-major window order).
pub fn maxpool_forward<T: Scalar>(
    x: &Tensor<T>,
    pool: usize,
) -> Result<(Tensor<T>, Vec<usize>), ShapeError> {
    let [h, w, c] = dims3(x, "maxpool input")?;
    if pool == 0 || h < pool || w < pool {
        return Err(ShapeError::new(format!(
            "maxpool {pool} does not fit {h}x{w}"
        )));
    }
    let (oh, ow) = (h / pool, w / pool);
    let xd = x.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut best = (i * pool * w + j * pool) * c + ch;
                for dy in 0..pool {
                    for dx in 0..pool {
                        let idx = ((i * pool + dy) * w + j * pool + dx) * c + ch;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                }
                out.push(xd[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[oh, ow, c], out)?, argmax))
}

pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>), ShapeError> {
    maxpool_forward(x, 2)
}

pub fn maxpool_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, ShapeError> {
    if argmax.len() != grad_out.len() {
        return Err(ShapeError::new(format!(
            "maxpool backward: {} indices vs {} gradients",
            argmax.len(),
            grad_out.len()
        )));
    }
    let mut gx = Tensor::zeros(input_shape);
    let gxd = gx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        *gxd.get_mut(idx)
            .ok_or_else(|| ShapeError::new("maxpool index out of range"))? += g;
    }
    Ok(gx)
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes gradient only where the input was strictly positive.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    same_shape(x, grad_out, "relu")?;
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid)
}

/// Backward through the sigmoid given its output `y`.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    same_shape(y, grad_out, "sigmoid")?;
    let data = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::from_vec(y.shape(), data)
}

fn dense_dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Result<(usize, usize), ShapeError> {
    match (x.shape(), w.shape()) {
        (&[n], &[wn, units]) if n == wn => Ok((n, units)),
        (xs, ws) => Err(ShapeError::new(format!(
            "dense: input {xs:?} incompatible with weight {ws:?}"
        ))),
    }
}

/// `y[o] = b[o] + sum_i x[i] * w[i, o]`.
pub fn dense_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, ShapeError> {
    let (_, units) = dense_dims(x, w)?;
    if b.shape() != [units] {
        return Err(ShapeError::new(format!("dense bias {:?} vs {units} units", b.shape())));
    }
    let mut y = b.data().to_vec();
    for (i, &xi) in x.data().iter().enumerate() {
        if xi != T::zero() {
            axpy(&mut y, xi, &w.data()[i * units..(i + 1) * units]);
        }
    }
    Tensor::from_vec(&[units], y)
}

pub struct DenseGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Tensor<T>,
    pub grad_b: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>, ShapeError> {
    let (n, units) = dense_dims(x, w)?;
    if grad_out.shape() != [units] {
        return Err(ShapeError::new(format!(
            "dense grad_out {:?} vs {units} units",
            grad_out.shape()
        )));
    }
    let g = grad_out.data();
    let mut gw = vec![T::zero(); n * units];
    let mut gx = Vec::with_capacity(n);
    for (i, &xi) in x.data().iter().enumerate() {
        let row = i * units..(i + 1) * units;
        if xi != T::zero() {
            axpy(&mut gw[row.clone()], xi, g);
        }
        gx.push(dot(&w.data()[row], g));
    }
    Ok(DenseGrads {
        grad_x: Tensor::from_vec(&[n], gx)?,
        grad_w: Tensor::from_vec(w.shape(), gw)?,
        grad_b: grad_out.clone(),
    })
}

pub fn flatten_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.clone().reshape(&[x.len()]).expect("length preserved")
}

pub fn flatten_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    grad_out.clone().reshape(input_shape)
}

/// Inverted dropout. In training each element survives with probability
/// `1 - rate` and is scaled by `1 / (1 - rate)`; the returned mask holds
/// that per-element factor. Outside training (or at rate 0) this is the
/// identity and the mask is all ones.
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> (Tensor<T>, Tensor<T>) {
    if !training || rate == 0.0 {
        return (x.clone(), Tensor::filled(x.shape(), T::one()));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask_data: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.random::<f64>() >= rate {
                keep
            } else {
                T::zero()
            }
        })
        .collect();
    let mask = Tensor::from_vec(x.shape(), mask_data).expect("same shape as input");
    let y = dropout_backward(&mask, x).expect("same shape as input");
    (y, mask)
}

pub fn dropout_backward<T: Scalar>(mask: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    same_shape(mask, grad_out, "dropout")?;
    let data = mask
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&m, &g)| m * g)
        .collect();
    Tensor::from_vec(mask.shape(), data)
}

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<(), ShapeError> {
    if a.shape() != b.shape() {
        return Err(ShapeError::new(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}
