//! The damaged-sign classifier: network definition, dataset split,
//! training loop, checkpoint files and training history.

mod checkpoint;
mod config;
mod dataset;
mod history;
mod train;

pub use checkpoint::{load_model, save_model, ModelCheckpoint, FORMAT_VERSION};
pub use config::TrainConfig;
pub use dataset::{load_crop_tensor, split_dataset, LabeledCrop, LabeledCropSet};
pub use history::{emit_history_csv, history_csv, read_history_csv, EpochMetrics, SplitMetrics};
pub use train::{predict, predict_tensor, train, train_tensors, TrainOutput};

use crate::imaging::ImagingError;
use crate::nn::{LayerSpec, NetworkSpec};
use crate::tensor::ShapeError;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("need at least 2 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("training split contains only {0} samples")]
    SingleClassTrainingSet(&'static str),
    #[error("model format error: {0}")]
    ModelFormat(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("image {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: ImagingError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MIN_INPUT_SIZE: usize = 24;

/// The sign-damage CNN for square `input_size` RGB crops:
/// three conv3x3+ReLU/maxpool2 blocks (32, 64, 128 filters), flatten,
/// dense 512 + ReLU, dropout 0.5, dense 1 + sigmoid.
pub fn build_damagenet(input_size: usize) -> Result<NetworkSpec, ShapeError> {
    if input_size < MIN_INPUT_SIZE {
        return Err(ShapeError::new(format!(
            "damagenet input size {input_size} is below {MIN_INPUT_SIZE}"
        )));
    }
    let spec = NetworkSpec {
        input_shape: [input_size, input_size, 3],
        layers: vec![
            LayerSpec::conv3x3(32),
            LayerSpec::Relu,
            LayerSpec::maxpool2(),
            LayerSpec::conv3x3(64),
            LayerSpec::Relu,
            LayerSpec::maxpool2(),
            LayerSpec::conv3x3(128),
            LayerSpec::Relu,
            LayerSpec::maxpool2(),
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 512 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense { units: 1 },
            LayerSpec::Sigmoid,
        ],
    };
    spec.shape_infer()?;
    Ok(spec)
}
