use super::{ImageRGB8, ImagingError, PixelRect};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn crop(img: &ImageRGB8, rect: PixelRect) -> Result<ImageRGB8, ImagingError> {
    if rect.x1 <= rect.x0 || rect.y1 <= rect.y0 {
        return Err(ImagingError::EmptyRect);
    }
    if rect.x1 > img.width() || rect.y1 > img.height() {
        return Err(ImagingError::RectOutOfBounds {
            rect,
            width: img.width(),
            height: img.height(),
        });
    }
    let stride = img.width() * 3;
    let mut data = Vec::with_capacity(rect.width() * rect.height() * 3);
    for y in rect.y0..rect.y1 {
        let row = y * stride;
        data.extend_from_slice(&img.data()[row + rect.x0 * 3..row + rect.x1 * 3]);
    }
    ImageRGB8::new(rect.width(), rect.height(), data)
}

/// Source coordinate for destination index `d`, half-pixel centres,
/// clamped to the valid sample range. Returns (lo, hi, frac).
fn sample_axis(d: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let s = (d as f64 + 0.5) * (src as f64 / dst as f64) - 0.5;
    let s = s.clamp(0.0, (src - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear resize with half-pixel centres and edge clamping. Results are
/// rounded half away from zero.
pub fn resize_bilinear(img: &ImageRGB8, w: usize, h: usize) -> Result<ImageRGB8, ImagingError> {
    if w == 0 || h == 0 {
        return Err(ImagingError::InvalidImage(format!(
            "resize target {w}x{h} must be positive"
        )));
    }
    let xs: Vec<_> = (0..w).map(|x| sample_axis(x, img.width(), w)).collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let (y0, y1, fy) = sample_axis(y, img.height(), h);
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageRGB8::new(w, h, data)
}

/// H x W x 3 tensor with every byte mapped to `byte / 255`.
pub fn to_float_norm<T: Scalar>(img: &ImageRGB8) -> Tensor<T> {
    let scale = T::of(255.0);
    let data = img.data().iter().map(|&b| T::of(b as f64) / scale).collect();
    Tensor::from_vec(&[img.height(), img.width(), 3], data).expect("image dims are nonzero")
}
