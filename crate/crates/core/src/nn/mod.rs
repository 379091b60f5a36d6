//! Layer specifications, shape inference and the forward/backward kernels
//! for the small CNN family used by the sign classifier.

pub mod layers;
mod network;
mod params;

pub use network::{
    backward_sample, forward_sample, network_backward, network_forward, BatchCache, Mode,
    SampleCache,
};
pub use params::{init_params, glorot_limit, LayerParams, ParamSet};

use serde::{Deserialize, Serialize};

use crate::tensor::ShapeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2D { filters: usize, kernel: usize },
    MaxPool { pool: usize },
    Relu,
    Flatten,
    Dense { units: usize },
    Dropout { rate: f64 },
    Sigmoid,
}

impl LayerSpec {
    pub fn conv3x3(filters: usize) -> Self {
        LayerSpec::Conv2D { filters, kernel: 3 }
    }

    pub fn maxpool2() -> Self {
        LayerSpec::MaxPool { pool: 2 }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2D { .. } | LayerSpec::Dense { .. })
    }

    pub fn is_activation(&self) -> bool {
        matches!(self, LayerSpec::Relu | LayerSpec::Sigmoid)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2D { .. } => "conv2d",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    fn validate(&self) -> Result<(), ShapeError> {
        match *self {
            LayerSpec::Conv2D { filters, kernel } if filters == 0 || kernel == 0 => Err(
                ShapeError::new("conv2d needs filters >= 1 and kernel >= 1"),
            ),
            LayerSpec::MaxPool { pool: 0 } => Err(ShapeError::new("pool size must be >= 1")),
            LayerSpec::Dense { units: 0 } => Err(ShapeError::new("dense needs units >= 1")),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => Err(ShapeError::new(
                format!("dropout rate {rate} outside [0, 1)"),
            )),
            _ => Ok(()),
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, ShapeError> {
        self.validate()?;
        match *self {
            LayerSpec::Conv2D { filters, kernel } => {
                let [h, w, _] = hwc(input, "conv2d")?;
                if h < kernel || w < kernel {
                    return Err(ShapeError::new(format!(
                        "conv2d kernel {kernel} does not fit {h}x{w}"
                    )));
                }
                Ok(vec![h - kernel + 1, w - kernel + 1, filters])
            }
            LayerSpec::MaxPool { pool } => {
                let [h, w, c] = hwc(input, "maxpool")?;
                if h < pool || w < pool {
                    return Err(ShapeError::new(format!(
                        "maxpool {pool} does not fit {h}x{w}"
                    )));
                }
                Ok(vec![h / pool, w / pool, c])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { units } => {
                if input.len() != 1 {
                    return Err(ShapeError::new(format!(
                        "dense expects a vector input, got {input:?}"
                    )));
                }
                Ok(vec![units])
            }
            LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
        }
    }

    /// (weight shape, bias shape) for parameterised layers.
    pub fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2D { filters, kernel } => {
                Some((vec![kernel, kernel, input[2], filters], vec![filters]))
            }
            LayerSpec::Dense { units } => Some((vec![input[0], units], vec![units])),
            _ => None,
        }
    }
}

fn hwc(shape: &[usize], what: &str) -> Result<[usize; 3], ShapeError> {
    match *shape {
        [h, w, c] => Ok([h, w, c]),
        _ => Err(ShapeError::new(format!(
            "{what} expects an HxWxC input, got {shape:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeReport {
    /// Output shape after each layer, in order.
    pub output_shapes: Vec<Vec<usize>>,
    /// Parameter count per layer (0 for parameter-free layers).
    pub layer_params: Vec<usize>,
    pub param_count: usize,
}

impl NetworkSpec {
    pub fn shape_infer(&self) -> Result<ShapeReport, ShapeError> {
        if self.input_shape.contains(&0) {
            return Err(ShapeError::new(format!(
                "input shape {:?} has a zero dimension",
                self.input_shape
            )));
        }
        let mut shape = self.input_shape.to_vec();
        let mut output_shapes = Vec::with_capacity(self.layers.len());
        let mut layer_params = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let count = layer
                .param_shapes(&shape)
                .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
                .unwrap_or(0);
            shape = layer.output_shape(&shape)?;
            output_shapes.push(shape.clone());
            layer_params.push(count);
        }
        Ok(ShapeReport {
            output_shapes,
            param_count: layer_params.iter().sum(),
            layer_params,
        })
    }

    /// Input shape seen by each layer.
    pub fn input_shapes(&self) -> Result<Vec<Vec<usize>>, ShapeError> {
        let report = self.shape_infer()?;
        let mut shapes = vec![self.input_shape.to_vec()];
        shapes.extend(report.output_shapes);
        shapes.pop();
        Ok(shapes)
    }

    /// Number of layers to run to obtain pre-sigmoid logits: every layer
    /// except a trailing sigmoid.
    pub fn logit_depth(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Sigmoid) => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    /// Human-readable stage list: the input followed by each stage, e.g.
    /// `conv2d(32,3)+relu`.
    pub fn describe_stages(&self) -> Vec<String> {
        let [h, w, c] = self.input_shape;
        let mut out = vec![format!("input({h}x{w}x{c})")];
        for stage in self.stages() {
            let parts: Vec<String> = stage
                .iter()
                .map(|l| match *l {
                    LayerSpec::Conv2D { filters, kernel } => format!("conv2d({filters},{kernel})"),
                    LayerSpec::MaxPool { pool } => format!("maxpool({pool})"),
                    LayerSpec::Dense { units } => format!("dense({units})"),
                    LayerSpec::Dropout { rate } => format!("dropout({rate})"),
                    other => other.name().to_string(),
                })
                .collect();
            out.push(parts.join("+"));
        }
        out
    }

    /// Layers with an activation folded onto the preceding layer.
    pub fn stages(&self) -> Vec<Vec<LayerSpec>> {
        let mut stages: Vec<Vec<LayerSpec>> = Vec::new();
        for layer in &self.layers {
            match stages.last_mut() {
                Some(stage) if layer.is_activation() => stage.push(*layer),
                _ => stages.push(vec![*layer]),
            }
        }
        stages
    }
}
