//! Models the enhance and evaluate commands can run.

use anyhow::anyhow;
use tdcgan_core::audio::Corpus;
use tdcgan_core::autodiff::Tensor;
use tdcgan_core::metrics::{enhance_samples, evaluate_corpus, EnhanceOptions, EvalReport, MetricError};
use tdcgan_core::models::{Enhancer, Generator, ModelError};
use tdcgan_core::train::Checkpoint;
use tdcgan_core::DType;

use crate::failure::{data, CmdResult};

/// Passes frames through unchanged; a baseline for the evaluation pipeline.
pub struct Identity {
    pub frame_len: usize,
}

impl Enhancer<f64> for Identity {
    fn frame_len(&self) -> usize {
        self.frame_len
    }

    fn enhance(&self, noisy: &Tensor<f64>) -> Result<Tensor<f64>, ModelError> {
        Ok(noisy.clone())
    }
}

pub enum Model {
    F32(Generator<f32>),
    F64(Generator<f64>),
    Identity(Identity),
}

impl Model {
    /// Generator weights of a checkpoint, in the precision they were stored in.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> CmdResult<Self> {
        let dtype = ckpt
            .tensors
            .iter()
            .find(|t| t.name.starts_with("gen/"))
            .map(|t| t.dtype)
            .ok_or_else(|| data(anyhow!("checkpoint holds no generator weights")))?;
        Ok(match dtype {
            DType::F32 => Model::F32(ckpt.generator()?),
            DType::F64 => Model::F64(ckpt.generator()?),
        })
    }

    pub fn enhance(&self, noisy: &[f64], opts: &EnhanceOptions) -> Result<Vec<f64>, MetricError> {
        match self {
            Model::F32(g) => enhance_samples(g, noisy, opts),
            Model::F64(g) => enhance_samples(g, noisy, opts),
            Model::Identity(m) => enhance_samples(m, noisy, opts),
        }
    }

    pub fn evaluate(&self, corpus: &Corpus, opts: &EnhanceOptions) -> Result<EvalReport, MetricError> {
        match self {
            Model::F32(g) => evaluate_corpus(g, corpus, opts),
            Model::F64(g) => evaluate_corpus(g, corpus, opts),
            Model::Identity(m) => evaluate_corpus(m, corpus, opts),
        }
    }
}
