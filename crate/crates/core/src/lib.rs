//! Time-domain speech enhancement with a temporal dilated convolutional GAN.
//!
//! The crate bundles everything needed to train and evaluate the model on a CPU:
//!
//! - [`autodiff`]: a small reverse-mode tensor engine with higher-order gradients,
//! - [`models`]: the masking generator (encoder, dilated mask estimator, decoder) and the
//!   depthwise-separable critic,
//! - [`losses`]: adversarial objectives, SNR / L1 generator penalties and zero-centered
//!   gradient penalties,
//! - [`train`]: Adam with separate critic/generator learning rates, the alternating
//!   training loop and binary checkpoints,
//! - [`audio`]: WAV I/O, pre-emphasis, framing with overlap-add averaging, SNR mixing and
//!   a synthetic paired corpus,
//! - [`metrics`]: global and segmental SNR and corpus evaluation reports.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below name
//! the concrete instantiations used in practice.

pub mod audio;
pub mod autodiff;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod scalar;
pub mod train;

pub use scalar::{DType, Scalar};

pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
pub type Generator32 = models::Generator<f32>;
pub type Generator64 = models::Generator<f64>;
pub type Discriminator32 = models::Discriminator<f32>;
pub type Discriminator64 = models::Discriminator<f64>;
pub type Trainer32 = train::Trainer<f32>;
pub type Trainer64 = train::Trainer<f64>;
