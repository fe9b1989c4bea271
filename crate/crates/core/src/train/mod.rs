//! Alternating critic/generator optimization, configuration and checkpoints.

mod adam;
mod checkpoint;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;
use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointError, TensorRecord, FORMAT_VERSION, MAGIC};

use crate::autodiff::{grad, no_grad, Tensor, TensorError};
use crate::losses::{discriminator_loss, generator_loss_from, DiscPenalty, LossError, LossWeights};
use crate::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, ModelError, Module};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub lr_disc: f64,
    pub lr_gen: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Critic updates per generator update.
    pub disc_steps_per_gen_step: usize,
    pub seed: u64,
    /// Write a checkpoint every this many generator steps (0 disables).
    pub checkpoint_every: u64,
    /// Stop after this many generator steps even if epochs remain.
    pub max_steps: Option<u64>,
    /// Hop between training frames cut from each clip.
    pub frame_shift: usize,
    /// Pre-emphasis coefficient applied to every clip before framing.
    pub pre_emphasis: f64,
    /// Record `wall_ms = 0` so that logs of repeated runs compare equal.
    pub strict: bool,
    pub weights: LossWeights,
    pub model: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            lr_disc: 3e-4,
            lr_gen: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            disc_steps_per_gen_step: 1,
            seed: 0,
            checkpoint_every: 0,
            max_steps: None,
            frame_shift: 8192,
            pre_emphasis: 0.95,
            strict: false,
            weights: LossWeights::default(),
            model: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Every violated constraint across the training, model and loss settings.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.batch_size == 0 {
            v.push("batch_size must be >= 1".to_string());
        }
        for (name, lr) in [("lr_disc", self.lr_disc), ("lr_gen", self.lr_gen)] {
            if !(lr > 0.0 && lr.is_finite()) {
                v.push(format!("{name} must be > 0, got {lr}"));
            }
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                v.push(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            v.push(format!("adam_eps must be > 0, got {}", self.adam_eps));
        }
        if self.disc_steps_per_gen_step == 0 {
            v.push("disc_steps_per_gen_step must be >= 1".to_string());
        }
        if self.frame_shift == 0 || self.frame_shift > self.model.frame_len {
            v.push(format!(
                "frame_shift must lie in 1..={}, got {}",
                self.model.frame_len, self.frame_shift
            ));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            v.push(format!("pre_emphasis must lie in [0, 1), got {}", self.pre_emphasis));
        }
        v.extend(self.model.violations());
        v.extend(self.discriminator.violations(self.model.frame_len));
        v.extend(self.weights.violations());
        v
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json()))
    }

    pub(crate) fn canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("config serializes")
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("frame length {got} does not match the model frame length {expected}")]
    FrameLength { expected: usize, got: usize },
    #[error("numerical failure at step {step}: {detail}")]
    NonFinite { step: u64, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl TrainError {
    fn at_step(self, step: u64) -> Self {
        let detail = match &self {
            TrainError::Loss(LossError::NonFinite { .. })
            | TrainError::Tensor(TensorError::NonFinite { .. })
            | TrainError::Loss(LossError::Tensor(TensorError::NonFinite { .. }))
            | TrainError::Loss(LossError::Model(ModelError::Tensor(TensorError::NonFinite { .. })))
            | TrainError::Model(ModelError::Tensor(TensorError::NonFinite { .. })) => self.to_string(),
            _ => return self,
        };
        TrainError::NonFinite { step, detail }
    }
}

/// Paired clean/noisy training frames of a fixed length, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBank<T: Scalar> {
    frame_len: usize,
    clean: Vec<T>,
    noisy: Vec<T>,
}

impl<T: Scalar> FrameBank<T> {
    pub fn new(frame_len: usize) -> Self {
        FrameBank {
            frame_len,
            clean: Vec::new(),
            noisy: Vec::new(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn push(&mut self, clean: &[T], noisy: &[T]) -> Result<(), TrainError> {
        for got in [clean.len(), noisy.len()] {
            if got != self.frame_len {
                return Err(TrainError::FrameLength {
                    expected: self.frame_len,
                    got,
                });
            }
        }
        self.clean.extend_from_slice(clean);
        self.noisy.extend_from_slice(noisy);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.clean.len() / self.frame_len.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    pub fn clean(&self, i: usize) -> &[T] {
        &self.clean[i * self.frame_len..][..self.frame_len]
    }

    pub fn noisy(&self, i: usize) -> &[T] {
        &self.noisy[i * self.frame_len..][..self.frame_len]
    }

    /// `(clean, noisy)` tensors of shape `[indices.len(), frame_len]`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Tensor<T>), TensorError> {
        let shape = [indices.len(), self.frame_len];
        let clean = indices.iter().flat_map(|&i| self.clean(i).iter().copied()).collect();
        let noisy = indices.iter().flat_map(|&i| self.noisy(i).iter().copied()).collect();
        Ok((Tensor::from_vec(clean, &shape)?, Tensor::from_vec(noisy, &shape)?))
    }
}

/// Position in the training schedule. Batch order and penalty sampling are derived from
/// the seed and these counters, so they are all a resumed run needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Progress {
    pub epoch: u64,
    /// Batches consumed in the current epoch.
    pub cursor: u64,
    /// Generator updates so far.
    pub step: u64,
    /// Critic updates so far.
    pub disc_steps: u64,
}

/// One row of the loss log, written after every generator update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    /// Unweighted generator penalty (negative SNR in dB, or L1).
    pub penalty: f64,
    pub r1: f64,
    pub r2: f64,
    pub wall_ms: u64,
}

impl LogRow {
    pub const CSV_HEADER: &'static str = "step,loss_d,loss_g,penalty,r1,r2,wall_ms";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step, self.loss_d, self.loss_g, self.penalty, self.r1, self.r2, self.wall_ms
        )
    }
}

const STREAM_SHUFFLE: u64 = 1;
const STREAM_MIX: u64 = 2;
const STREAM_INIT: u64 = 3;

fn derived_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) << 20);
    rng
}

fn param_sizes<T: Scalar, M: Module<T>>(m: &M) -> Vec<usize> {
    m.named_parameters().iter().map(|(_, t)| t.numel()).collect()
}

pub struct Trainer<T: Scalar> {
    cfg: TrainConfig,
    generator: Generator<T>,
    discriminator: Discriminator<T>,
    opt_gen: Adam<T>,
    opt_disc: Adam<T>,
    progress: Progress,
    last_disc: (f64, f64, f64),
}

impl<T: Scalar> Trainer<T> {
    /// Fresh models and optimizers, initialized from `cfg.seed`.
    pub fn new(cfg: TrainConfig) -> Result<Self, TrainError> {
        let violations = cfg.violations();
        if !violations.is_empty() {
            return Err(TrainError::InvalidConfig(violations));
        }
        let mut init = derived_rng(cfg.seed, STREAM_INIT, 0);
        let generator = Generator::new(cfg.model.clone(), init.next_u64())?;
        let discriminator = Discriminator::new(cfg.discriminator.clone(), cfg.model.frame_len, init.next_u64())?;
        let opt_gen = Adam::new(cfg.lr_gen, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, &param_sizes(&generator));
        let opt_disc = Adam::new(cfg.lr_disc, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, &param_sizes(&discriminator));
        Ok(Trainer {
            cfg,
            generator,
            discriminator,
            opt_gen,
            opt_disc,
            progress: Progress::default(),
            last_disc: (0.0, 0.0, 0.0),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &Generator<T> {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator<T> {
        &self.discriminator
    }

    pub fn opt_gen(&self) -> &Adam<T> {
        &self.opt_gen
    }

    pub fn opt_disc(&self) -> &Adam<T> {
        &self.opt_disc
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    pub fn into_models(self) -> (Generator<T>, Discriminator<T>) {
        (self.generator, self.discriminator)
    }

    /// Whether the schedule (epochs and step cap) is exhausted.
    pub fn finished(&self) -> bool {
        self.progress.epoch >= self.cfg.epochs || self.cfg.max_steps.is_some_and(|m| self.progress.step >= m)
    }

    /// Frame order of `epoch`: a seeded permutation, identical for every run with the same seed.
    pub fn epoch_order(&self, epoch: u64, frames: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..frames).collect();
        order.shuffle(&mut derived_rng(self.cfg.seed, STREAM_SHUFFLE, epoch));
        order
    }

    /// Runs until the schedule is exhausted, calling `on_step` after every generator update.
    pub fn run<F>(&mut self, data: &FrameBank<T>, mut on_step: F) -> Result<(), TrainError>
    where
        F: FnMut(&Trainer<T>, &LogRow) -> Result<(), TrainError>,
    {
        if data.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        if data.frame_len() != self.cfg.model.frame_len {
            return Err(TrainError::FrameLength {
                expected: self.cfg.model.frame_len,
                got: data.frame_len(),
            });
        }
        let n = data.len();
        let bs = self.cfg.batch_size;
        let per_epoch = n.div_ceil(bs) as u64;
        while !self.finished() {
            let order = self.epoch_order(self.progress.epoch, n);
            while self.progress.cursor < per_epoch && !self.finished() {
                let start = self.progress.cursor as usize * bs;
                let idx = &order[start..(start + bs).min(n)];
                let (clean, noisy) = data.batch(idx)?;
                let row = self.train_batch(&clean, &noisy)?;
                self.progress.cursor += 1;
                if let Some(row) = row {
                    on_step(self, &row)?;
                }
            }
            if self.progress.cursor >= per_epoch {
                self.progress.epoch += 1;
                self.progress.cursor = 0;
            }
        }
        Ok(())
    }

    /// One critic update on the batch, followed by a generator update when the critic
    /// ratio calls for one. Returns the log row of the generator update.
    pub fn train_batch(&mut self, clean: &Tensor<T>, noisy: &Tensor<T>) -> Result<Option<LogRow>, TrainError> {
        let started = Instant::now();
        let step = self.progress.step;
        let gen_turn = (self.progress.disc_steps + 1) % self.cfg.disc_steps_per_gen_step as u64 == 0;
        let enhanced = if gen_turn {
            self.generator.forward(noisy)
        } else {
            no_grad(|| self.generator.forward(noisy))
        }
        .map_err(|e| TrainError::from(e).at_step(step))?;

        self.disc_update(clean, &enhanced, noisy).map_err(|e| e.at_step(step))?;
        if !gen_turn {
            return Ok(None);
        }
        let row = self.gen_update(clean, &enhanced, noisy).map_err(|e| e.at_step(step))?;
        let wall_ms = if self.cfg.strict { 0 } else { started.elapsed().as_millis() as u64 };
        Ok(Some(LogRow { wall_ms, ..row }))
    }

    fn disc_update(&mut self, clean: &Tensor<T>, enhanced: &Tensor<T>, noisy: &Tensor<T>) -> Result<(), TrainError> {
        let mix: Option<Vec<T>> = (self.cfg.weights.disc_penalty == DiscPenalty::InterpGp).then(|| {
            let mut rng = derived_rng(self.cfg.seed, STREAM_MIX, self.progress.disc_steps);
            (0..clean.shape()[0]).map(|_| T::lit(rng.gen::<f64>())).collect()
        });
        let loss = discriminator_loss(&self.discriminator, clean, enhanced, noisy, &self.cfg.weights, mix.as_deref())?;
        let grads = {
            let params: Vec<&Tensor<T>> = self.discriminator.named_parameters().into_iter().map(|(_, t)| t).collect();
            grad(&loss.total, &params, false)?
        };
        let mut params: Vec<&mut Tensor<T>> = self.discriminator.named_parameters_mut().into_iter().map(|(_, t)| t).collect();
        self.opt_disc.step(&mut params, &grads)?;
        self.progress.disc_steps += 1;
        self.last_disc = (loss.total.item()?.as_f64(), loss.r1, loss.r2);
        Ok(())
    }

    fn gen_update(&mut self, clean: &Tensor<T>, enhanced: &Tensor<T>, noisy: &Tensor<T>) -> Result<LogRow, TrainError> {
        let loss = generator_loss_from(&self.discriminator, clean, enhanced, noisy, &self.cfg.weights)?;
        let grads = {
            let params: Vec<&Tensor<T>> = self.generator.named_parameters().into_iter().map(|(_, t)| t).collect();
            grad(&loss.total, &params, false)?
        };
        let mut params: Vec<&mut Tensor<T>> = self.generator.named_parameters_mut().into_iter().map(|(_, t)| t).collect();
        self.opt_gen.step(&mut params, &grads)?;
        self.progress.step += 1;
        let (loss_d, r1, r2) = self.last_disc;
        Ok(LogRow {
            step: self.progress.step,
            loss_d,
            loss_g: loss.total.item()?.as_f64(),
            penalty: loss.penalty,
            r1,
            r2,
            wall_ms: 0,
        })
    }
}
