//! Seeded training-time augmentation on `H x W x C` float tensors: random
//! affine warp (zoom, rotation, shear, shift) with horizontal flip, then
//! cutout.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::imaging::PixelRect;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub rotation_deg: f64,
    pub width_shift: f64,
    pub height_shift: f64,
    pub shear_deg: f64,
    pub zoom: f64,
    pub hflip_prob: f64,
    pub cutout_size: usize,
    pub cutout_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation_deg: 15.0,
            width_shift: 0.1,
            height_shift: 0.1,
            shear_deg: 10.0,
            zoom: 0.1,
            hflip_prob: 0.5,
            cutout_size: 40,
            cutout_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    /// The identity configuration.
    pub fn none() -> Self {
        Self {
            rotation_deg: 0.0,
            width_shift: 0.0,
            height_shift: 0.0,
            shear_deg: 0.0,
            zoom: 0.0,
            hflip_prob: 0.0,
            cutout_size: 0,
            cutout_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ranges = [
            ("rotation_deg", self.rotation_deg),
            ("width_shift", self.width_shift),
            ("height_shift", self.height_shift),
            ("shear_deg", self.shear_deg),
            ("zoom", self.zoom),
        ];
        for (name, v) in ranges {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if self.shear_deg >= 90.0 {
            return Err("shear_deg must be below 90".into());
        }
        if self.zoom >= 1.0 {
            return Err("zoom must be below 1".into());
        }
        for (name, p) in [("hflip_prob", self.hflip_prob), ("cutout_prob", self.cutout_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

/// Concrete draw of the affine family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub angle_deg: f64,
    /// Shift in pixels.
    pub shift_x: f64,
    pub shift_y: f64,
    pub shear_deg: f64,
    pub zoom: f64,
}

/// Forward map `[x', y'] = A [x, y] + t`, stored row-major as 2x3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine(pub [[f64; 3]; 2]);

impl Affine {
    pub const IDENTITY: Affine = Affine([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
        )
    }

    pub fn inverse(&self) -> Option<Affine> {
        let [[a, b, tx], [c, d, ty]] = self.0;
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return None;
        }
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Some(Affine([
            [ia, ib, -(ia * tx + ib * ty)],
            [ic, id, -(ic * tx + id * ty)],
        ]))
    }

    /// `zoom * rotate * shear` about the pixel-centre of an `h x w` image,
    /// followed by the shift.
    pub fn from_params(p: &AffineParams, h: usize, w: usize) -> Affine {
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let (s, c) = p.angle_deg.to_radians().sin_cos();
        let k = p.shear_deg.to_radians().tan();
        // R * S with S = [[1, k], [0, 1]]
        let rs = [[c, c * k - s], [s, s * k + c]];
        let a = [
            [p.zoom * rs[0][0], p.zoom * rs[0][1]],
            [p.zoom * rs[1][0], p.zoom * rs[1][1]],
        ];
        let tx = cx - (a[0][0] * cx + a[0][1] * cy) + p.shift_x;
        let ty = cy - (a[1][0] * cx + a[1][1] * cy) + p.shift_y;
        Affine([[a[0][0], a[0][1], tx], [a[1][0], a[1][1], ty]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSample {
    pub matrix: Affine,
    pub flip: bool,
}

fn symmetric(rng: &mut Rng, r: f64) -> f64 {
    (rng.random::<f64>() * 2.0 - 1.0) * r
}

pub fn sample_affine_params(cfg: &AugmentConfig, rng: &mut Rng, h: usize, w: usize) -> (AffineParams, bool) {
    let params = AffineParams {
        angle_deg: symmetric(rng, cfg.rotation_deg),
        shift_x: symmetric(rng, cfg.width_shift) * w as f64,
        shift_y: symmetric(rng, cfg.height_shift) * h as f64,
        shear_deg: symmetric(rng, cfg.shear_deg),
        zoom: 1.0 + symmetric(rng, cfg.zoom),
    };
    let flip = rng.random::<f64>() < cfg.hflip_prob;
    (params, flip)
}

pub fn sample_affine(cfg: &AugmentConfig, rng: &mut Rng, h: usize, w: usize) -> AffineSample {
    let (params, flip) = sample_affine_params(cfg, rng, h, w);
    AffineSample {
        matrix: Affine::from_params(&params, h, w),
        flip,
    }
}

/// Sub-1e-9 offsets from integer positions are treated as exact so that
/// right-angle rotations reproduce pixels exactly.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Warps `x` (H x W x C) by inverse-mapping every output pixel through
/// `sample.matrix` and sampling bilinearly with edge replication. The flip
/// (`x -> W-1-x`) is applied to the input before the warp.
pub fn apply_affine<T: Scalar>(x: &Tensor<T>, sample: &AffineSample) -> Tensor<T> {
    let [h, w, c] = match *x.shape() {
        [h, w, c] => [h, w, c],
        ref s => panic!("apply_affine expects H x W x C, got {s:?}"),
    };
    if sample.matrix == Affine::IDENTITY && !sample.flip {
        return x.clone();
    }
    let Some(inv) = sample.matrix.inverse() else {
        return x.clone();
    };
    let src = x.data();
    let at = |yy: usize, xx: usize, ch: usize| src[(yy * w + xx) * c + ch];
    let axis = |v: f64, n: usize| -> (usize, usize, f64) {
        let v = snap(v).clamp(0.0, (n - 1) as f64);
        let lo = v.floor() as usize;
        (lo, (lo + 1).min(n - 1), v - lo as f64)
    };
    let mut out = Vec::with_capacity(x.len());
    for oy in 0..h {
        for ox in 0..w {
            let (mut sx, sy) = inv.apply(ox as f64, oy as f64);
            if sample.flip {
                sx = (w - 1) as f64 - sx;
            }
            let (x0, x1, fx) = axis(sx, w);
            let (y0, y1, fy) = axis(sy, h);
            let (fx, fy) = (T::of(fx), T::of(fy));
            let one = T::one();
            for ch in 0..c {
                let top = at(y0, x0, ch) * (one - fx) + at(y0, x1, ch) * fx;
                let bottom = at(y1, x0, ch) * (one - fx) + at(y1, x1, ch) * fx;
                out.push(top * (one - fy) + bottom * fy);
            }
        }
    }
    Tensor::from_vec(x.shape(), out).expect("shape preserved")
}

/// The square cutout would zero, if any. Consumes the same draws whether
/// or not the cutout fires.
pub fn cutout_region(h: usize, w: usize, cfg: &AugmentConfig, rng: &mut Rng) -> Option<PixelRect> {
    let fire = rng.random::<f64>() < cfg.cutout_prob;
    let cx = rng.random_range(0..w) as i64;
    let cy = rng.random_range(0..h) as i64;
    if !fire || cfg.cutout_size == 0 {
        return None;
    }
    let size = cfg.cutout_size as i64;
    let (x0, y0) = (cx - size / 2, cy - size / 2);
    PixelRect::clipped(x0, y0, x0 + size, y0 + size, w, h).ok()
}

pub fn cutout<T: Scalar>(x: &Tensor<T>, cfg: &AugmentConfig, rng: &mut Rng) -> Tensor<T> {
    let [h, w, c] = match *x.shape() {
        [h, w, c] => [h, w, c],
        ref s => panic!("cutout expects H x W x C, got {s:?}"),
    };
    let mut out = x.clone();
    if let Some(r) = cutout_region(h, w, cfg, rng) {
        let d = out.data_mut();
        for y in r.y0..r.y1 {
            d[(y * w + r.x0) * c..(y * w + r.x1) * c].fill(T::zero());
        }
    }
    out
}

/// Full per-sample augmentation: flip + affine, then cutout.
pub fn augment<T: Scalar>(x: &Tensor<T>, cfg: &AugmentConfig, rng: &mut Rng) -> Tensor<T> {
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let sample = sample_affine(cfg, rng, h, w);
    let warped = apply_affine(x, &sample);
    cutout(&warped, cfg, rng)
}
