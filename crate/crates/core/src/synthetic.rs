//! Synthetic sign crops for smoke tests and fixtures. Each crop is a
//! uniform bright square (the sign) centred on a mid-tone background, the
//! way a detector crop with a margin looks; damaged crops carry a dark
//! 12x12 patch inside the sign.

use rand::Rng as _;

use crate::imaging::ImageRGB8;
use crate::rng::{stream, Purpose};

pub const PATCH: usize = 12;

/// One crop. Brightness and patch placement come from `(seed, index)`.
pub fn sign_crop(size: usize, damaged: bool, seed: u64, index: u64) -> ImageRGB8 {
    let mut rng = stream(seed, Purpose::Synthetic, index);
    let base = [
        rng.random_range(200..=240u8),
        rng.random_range(200..=240u8),
        rng.random_range(200..=240u8),
    ];
    let bg = [
        rng.random_range(90..=130u8),
        rng.random_range(100..=140u8),
        rng.random_range(90..=130u8),
    ];
    let mut img = ImageRGB8::filled(size, size, bg).expect("size >= 1");
    // sign spans 80% of the crop, i.e. a 10% margin on every side
    let margin = size / 10;
    let (lo, hi) = (margin, size - margin);
    for y in lo..hi {
        for x in lo..hi {
            img.set_pixel(x, y, base);
        }
    }
    if damaged && hi - lo >= PATCH {
        let x0 = rng.random_range(lo..=hi - PATCH);
        let y0 = rng.random_range(lo..=hi - PATCH);
        let dark = [
            rng.random_range(30..=50u8),
            rng.random_range(20..=35u8),
            rng.random_range(10..=25u8),
        ];
        for y in y0..y0 + PATCH {
            for x in x0..x0 + PATCH {
                img.set_pixel(x, y, dark);
            }
        }
    }
    img
}

/// `n` crops alternating undamaged/damaged, starting with undamaged.
pub fn sign_crops(n: usize, size: usize, seed: u64) -> Vec<(ImageRGB8, bool)> {
    (0..n)
        .map(|i| {
            let damaged = i % 2 == 1;
            (sign_crop(size, damaged, seed, i as u64), damaged)
        })
        .collect()
}
