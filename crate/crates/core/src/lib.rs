//! Diagonal state-space sequence models that regress erosion depth profiles
//! from audio spectrogram features.
//!
//! The numeric core ([`ssm`], [`nn`], [`training`]) is generic over the
//! [`Scalar`] type; `f64` aliases are provided below for the common case.
//! Audio ingestion and dataset assembly work in `f64`.

pub mod audio;
pub mod dataset;
pub mod error;
mod scalar;
pub mod nn;
pub mod ssm;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DiagonalSsm64 = ssm::DiagonalSsm<f64>;
pub type DiscreteSsm64 = ssm::DiscreteSsm<f64>;
pub type Kernel64 = ssm::Kernel<f64>;
pub type SequenceTensor64 = nn::SequenceTensor<f64>;
pub type Model64 = nn::Model<f64>;
pub type TrainedModel64 = training::TrainedModel<f64>;
