use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::ClassifierError;
use crate::imaging::{read_ppm, resize_bilinear, to_float_norm};
use crate::rng::{stream, Purpose};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCrop {
    pub path: PathBuf,
    /// `true` = damaged.
    pub damaged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCropSet {
    pub items: Vec<LabeledCrop>,
}

impl LabeledCropSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// (damaged, undamaged)
    pub fn class_counts(&self) -> (usize, usize) {
        let damaged = self.items.iter().filter(|c| c.damaged).count();
        (damaged, self.items.len() - damaged)
    }
}

/// Seeded uniform shuffle, then the first `floor(fraction * N)` items train
/// and the rest validate.
pub fn split_dataset(
    set: &LabeledCropSet,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledCropSet, LabeledCropSet), ClassifierError> {
    let n = set.len();
    if n < 2 {
        return Err(ClassifierError::TooFewSamples(n));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ClassifierError::Config(format!(
            "train fraction {fraction} outside (0, 1)"
        )));
    }
    // 1e-9 absorbs representation error such as 0.7 * 10 = 6.999...
    let n_train = (fraction * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(ClassifierError::TooFewSamples(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Split, 0));
    let pick = |idx: &[usize]| LabeledCropSet {
        items: idx.iter().map(|&i| set.items[i].clone()).collect(),
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Reads a PPM crop, resizes it to `size x size` and maps bytes to [0, 1].
pub fn load_crop_tensor(path: &Path, size: usize) -> Result<Tensor<f32>, ClassifierError> {
    let img = read_ppm(path).map_err(|source| ClassifierError::Image {
        path: path.display().to_string(),
        source,
    })?;
    let resized = resize_bilinear(&img, size, size).map_err(|source| ClassifierError::Image {
        path: path.display().to_string(),
        source,
    })?;
    Ok(to_float_norm(&resized))
}
