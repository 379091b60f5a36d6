//! Road-asset inspection toolkit.
//!
//! Frames and detector output go in; sign crops, a damaged/undamaged CNN,
//! detection metrics and geolocated anomaly records come out. Numeric code
//! is generic over [`Scalar`]; the aliases below pin the `f32` training
//! types and the `f64` types used by gradient checks.

pub mod augment;
pub mod classifier;
pub mod detections;
pub mod imaging;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod tensor;

pub use imaging::{ImageRGB8, ImagingError, PixelRect};
pub use scalar::Scalar;
pub use tensor::ShapeError;

pub type Tensor = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type ParamSet = nn::ParamSet<f32>;
pub type ParamSet64 = nn::ParamSet<f64>;
pub type GradSet = nn::ParamSet<f32>;
pub type AdamState = optim::AdamState<f32>;
