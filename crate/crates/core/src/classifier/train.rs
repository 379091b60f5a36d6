use rand::seq::SliceRandom;

use super::{
    build_damagenet, load_crop_tensor, split_dataset, ClassifierError, EpochMetrics,
    LabeledCropSet, ModelCheckpoint, SplitMetrics, TrainConfig, FORMAT_VERSION,
};
use crate::augment::augment;
use crate::imaging::{resize_bilinear, to_float_norm, ImageRGB8};
use crate::loss::{focal_batch, label_smooth};
use crate::metrics::binary_metrics;
use crate::nn::{backward_sample, forward_sample, init_params, Mode, NetworkSpec, ParamSet};
use crate::optim::AdamState;
use crate::rng::{stream, Purpose};
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct TrainOutput {
    pub checkpoint: ModelCheckpoint,
    /// Training-split metrics of the freshly initialised network.
    pub initial_train: SplitMetrics,
    pub history: Vec<EpochMetrics>,
}

/// Splits `set`, loads every crop at `cfg.input_size` and trains.
pub fn train(set: &LabeledCropSet, cfg: &TrainConfig) -> Result<TrainOutput, ClassifierError> {
    cfg.validate()?;
    let (train_set, val_set) = split_dataset(set, cfg.train_fraction, cfg.seed)?;
    let load = |s: &LabeledCropSet| -> Result<(Vec<Tensor<f32>>, Vec<bool>), ClassifierError> {
        let xs = s
            .items
            .iter()
            .map(|c| load_crop_tensor(&c.path, cfg.input_size))
            .collect::<Result<_, _>>()?;
        Ok((xs, s.items.iter().map(|c| c.damaged).collect()))
    };
    let (train_x, train_y) = load(&train_set)?;
    let (val_x, val_y) = load(&val_set)?;
    train_tensors(&train_x, &train_y, &val_x, &val_y, cfg)
}

fn logit(spec: &NetworkSpec, params: &ParamSet<f32>, x: &Tensor<f32>) -> Result<f32, ClassifierError> {
    let cache = forward_sample(spec, params, x, spec.logit_depth(), Mode::Eval, 0)?;
    Ok(cache.output().data()[0])
}

fn evaluate_split(
    spec: &NetworkSpec,
    params: &ParamSet<f32>,
    xs: &[Tensor<f32>],
    ys: &[bool],
    cfg: &TrainConfig,
) -> Result<SplitMetrics, ClassifierError> {
    if xs.is_empty() {
        return Ok(SplitMetrics {
            loss: 0.0,
            accuracy: 0.0,
            precision: 0.0,
            recall: 0.0,
        });
    }
    let logits = xs
        .iter()
        .map(|x| logit(spec, params, x).map(f64::from))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<f64> = ys.iter().map(|&y| f64::from(u8::from(y))).collect();
    let (loss, _) = focal_batch(&logits, &targets, &cfg.focal);
    let probs: Vec<f64> = logits.iter().map(|&z| crate::nn::layers::sigmoid(z)).collect();
    let m = binary_metrics(&probs, ys, cfg.threshold).expect("lengths match, nonempty");
    Ok(SplitMetrics {
        loss,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
    })
}

/// Mixes the base seed with the epoch index.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ epoch as u64
}

/// Training loop over preloaded `H x W x 3` tensors.
///
/// Each epoch reshuffles the training samples (seed xor epoch), walks them
/// in batches of `cfg.batch_size`, augments every sample from its own
/// stream, takes one Adam step on the mean focal loss per batch, and then
/// records loss/accuracy/precision/recall on both splits with augmentation
/// and dropout off.
pub fn train_tensors(
    train_x: &[Tensor<f32>],
    train_y: &[bool],
    val_x: &[Tensor<f32>],
    val_y: &[bool],
    cfg: &TrainConfig,
) -> Result<TrainOutput, ClassifierError> {
    cfg.validate()?;
    assert_eq!(train_x.len(), train_y.len());
    assert_eq!(val_x.len(), val_y.len());
    if !train_y.iter().any(|&y| y) {
        return Err(ClassifierError::SingleClassTrainingSet("undamaged"));
    }
    if train_y.iter().all(|&y| y) {
        return Err(ClassifierError::SingleClassTrainingSet("damaged"));
    }
    let spec = build_damagenet(cfg.input_size)?;
    let mut params = init_params::<f32>(&spec, cfg.seed)?;
    let mut adam = AdamState::new(&params, cfg.adam);
    let depth = spec.logit_depth();
    let smoothing = cfg.label_smoothing as f32;
    let initial_train = evaluate_split(&spec, &params, train_x, train_y, cfg)?;

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let eseed = epoch_seed(cfg.seed, epoch);
        let mut order: Vec<usize> = (0..train_x.len()).collect();
        order.shuffle(&mut stream(eseed, Purpose::Shuffle, 0));

        for batch in order.chunks(cfg.batch_size) {
            let mut caches = Vec::with_capacity(batch.len());
            let mut logits = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut rng = stream(eseed, Purpose::Augment, i as u64);
                let x = augment(&train_x[i], &cfg.augment, &mut rng);
                let mode = Mode::Train { dropout_seed: eseed };
                let cache = forward_sample(&spec, &params, &x, depth, mode, i as u64)?;
                logits.push(cache.output().data()[0]);
                targets.push(label_smooth(f32::from(u8::from(train_y[i])), smoothing));
                caches.push(cache);
            }
            let (_, grads_out) = focal_batch(&logits, &targets, &cfg.focal);
            let mut grads = params.zeros_like();
            for (cache, g) in caches.iter().zip(grads_out) {
                let g = Tensor::from_vec(&[1], vec![g])?;
                grads.add_assign(&backward_sample(&spec, &params, cache, &g)?)?;
            }
            adam.step(&mut params, &grads)?;
        }

        history.push(EpochMetrics {
            epoch: epoch + 1,
            train: evaluate_split(&spec, &params, train_x, train_y, cfg)?,
            val: evaluate_split(&spec, &params, val_x, val_y, cfg)?,
        });
    }

    Ok(TrainOutput {
        checkpoint: ModelCheckpoint {
            format_version: FORMAT_VERSION,
            spec,
            params,
            config: cfg.clone(),
        },
        initial_train,
        history,
    })
}

/// Damaged probability for an already normalised input tensor.
pub fn predict_tensor(ckpt: &ModelCheckpoint, x: &Tensor<f32>) -> Result<f64, ClassifierError> {
    let depth = ckpt.spec.layers.len();
    let cache = forward_sample(&ckpt.spec, &ckpt.params, x, depth, Mode::Eval, 0)?;
    Ok(f64::from(cache.output().data()[0]).clamp(0.0, 1.0))
}

/// Resizes `image` to the network input, normalises, and returns the
/// damaged probability (dropout off).
pub fn predict(ckpt: &ModelCheckpoint, image: &ImageRGB8) -> Result<f64, ClassifierError> {
    let [h, w, _] = ckpt.spec.input_shape;
    let resized = resize_bilinear(image, w, h).map_err(|source| ClassifierError::Image {
        path: "<input>".into(),
        source,
    })?;
    predict_tensor(ckpt, &to_float_norm(&resized))
}
