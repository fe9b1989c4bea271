//! Generator and critic networks.

mod config;
mod discriminator;
mod generator;
mod layers;

use thiserror::Error;

pub use config::{DiscriminatorConfig, GeneratorConfig, MaskTarget};
pub use discriminator::{Discriminator, DscLayer};
pub use generator::{DilatedBlock, Generator, Stage};
pub use layers::{Conv1d, Init, InstanceNorm, Linear, Module, PRelu};

use crate::autodiff::{Tensor, TensorError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("expected input of shape [batch, {expected}], got {shape:?}")]
    WrongLength { expected: usize, shape: Vec<usize> },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Scores (candidate, noisy) pairs: `[B, L] x [B, L] -> [B]`.
pub trait Critic<T: Scalar> {
    fn score(&self, candidate: &Tensor<T>, noisy: &Tensor<T>) -> Result<Tensor<T>, ModelError>;
}

/// Maps a batch of noisy frames `[B, frame_len]` to enhanced frames of the same shape.
pub trait Enhancer<T: Scalar> {
    fn frame_len(&self) -> usize;
    fn enhance(&self, noisy: &Tensor<T>) -> Result<Tensor<T>, ModelError>;
}

/// Parameter totals grouped by top-level component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamReport {
    pub groups: Vec<(String, usize)>,
    pub total: usize,
}

pub fn count_parameters<T: Scalar, M: Module<T> + ?Sized>(model: &M) -> ParamReport {
    let mut groups: Vec<(String, usize)> = Vec::new();
    for (name, t) in model.named_parameters() {
        let key = name.split('.').next().unwrap_or("").to_string();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, n)) => *n += t.numel(),
            None => groups.push((key, t.numel())),
        }
    }
    let total = groups.iter().map(|(_, n)| n).sum();
    ParamReport { groups, total }
}

/// Temporal context of the dilated stack, in encoder frames and in input samples.
/// The field is centered: half of it lies in the future.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveField {
    pub frames: usize,
    pub samples: usize,
}

pub fn receptive_field(cfg: &GeneratorConfig) -> ReceptiveField {
    let per_stack: usize = (0..cfg.blocks_per_tdcn)
        .map(|m| (cfg.block_kernel - 1) * cfg.dilation(m))
        .sum();
    let frames = 1 + cfg.num_tdcn * per_stack;
    ReceptiveField {
        frames,
        samples: (frames - 1) * cfg.enc_stride + cfg.enc_kernel,
    }
}

/// Measures the receptive field of the dilated stack by perturbation. The generator is
/// linearized (instance norm off, PReLU slopes 1) and one bottleneck frame in the middle
/// of a zero feature map is bumped; the result is the span of output frames that moved.
pub fn measure_receptive_field(cfg: &GeneratorConfig, seed: u64) -> Result<usize, ModelError> {
    let cfg = GeneratorConfig {
        instance_norm: false,
        ..cfg.clone()
    };
    let mut g: Generator<f64> = Generator::new(cfg.clone(), seed)?;
    for (name, p) in g.named_parameters_mut() {
        if name.contains(".act") {
            *p = Tensor::parameter(vec![1.0; p.numel()], &p.shape().to_vec())?;
        }
    }
    let (c, frames) = (cfg.bottleneck_channels, cfg.frames());
    let mid = frames / 2;
    let base = Tensor::zeros(&[1, c, frames])?;
    let mut bumped = vec![0.0; c * frames];
    for ch in 0..c {
        bumped[ch * frames + mid] = 1.0;
    }
    let bumped = Tensor::from_vec(bumped, &[1, c, frames])?;
    let (a, b) = crate::autodiff::no_grad(|| Ok::<_, ModelError>((g.tdcn_forward(&base)?, g.tdcn_forward(&bumped)?)))?;
    let moved: Vec<usize> = (0..frames)
        .filter(|&f| (0..c).any(|ch| (a.data()[ch * frames + f] - b.data()[ch * frames + f]).abs() > 1e-12))
        .collect();
    match (moved.first(), moved.last()) {
        (Some(&lo), Some(&hi)) if lo > 0 && hi + 1 < frames => Ok(hi - lo + 1),
        _ => Err(ModelError::InvalidConfig(vec![format!(
            "{frames} frames cannot contain the receptive field of the dilated stack"
        )])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::no_grad;

    fn tiny() -> GeneratorConfig {
        GeneratorConfig::tiny(512, 16, 8, 16, 1, 3)
    }

    #[test]
    fn linear_layer_count() {
        let mut init = Init::new(0);
        let lin: Linear<f32> = Linear::new(&mut init, 2, 3);
        assert_eq!(count_parameters(&lin).total, 9);
    }

    #[test]
    fn dilated_block_count_matches_hand_formula() {
        let cfg = GeneratorConfig::default();
        let block: DilatedBlock<f32> = DilatedBlock::new(&mut Init::new(0), &cfg, 4);
        let convs = 128 * 512 + 512 + 512 * 3 + 512 + 512 * 128 + 128;
        let norm_act = 2 * (2 * 512 + 512);
        assert_eq!(count_parameters(&block).total, convs + norm_act);
    }

    #[test]
    fn receptive_field_formula() {
        let rf = receptive_field(&GeneratorConfig::default());
        assert_eq!(rf, ReceptiveField { frames: 2041, samples: 32672 });
        let one = GeneratorConfig {
            num_tdcn: 1,
            blocks_per_tdcn: 1,
            block_kernel: 1,
            ..Default::default()
        };
        assert_eq!(receptive_field(&one).frames, 1);
    }

    #[test]
    fn measured_field_matches_formula() {
        let cfg = tiny();
        assert_eq!(measure_receptive_field(&cfg, 1).unwrap(), 15);
        assert_eq!(receptive_field(&cfg).frames, 15);
        let short = GeneratorConfig::tiny(128, 16, 8, 16, 1, 4);
        assert!(measure_receptive_field(&short, 1).is_err());
    }

    #[test]
    fn tiny_generator_runs() {
        let g: Generator<f32> = Generator::new(tiny(), 3).unwrap();
        let x = Tensor::from_vec((0..1024).map(|i| ((i as f32) * 0.01).sin()).collect(), &[2, 512]).unwrap();
        let (y, mask, ledger) = no_grad(|| g.forward_traced(&x)).unwrap();
        assert_eq!(y.shape(), &[2, 512]);
        assert!(y.all_finite());
        assert!(mask.data().iter().all(|&m| m >= 0.0));
        assert_eq!(ledger, Generator::<f32>::shape_ledger(&tiny()));
    }

    #[test]
    fn seeded_build_is_deterministic() {
        let a: Generator<f32> = Generator::new(tiny(), 11).unwrap();
        let b: Generator<f32> = Generator::new(tiny(), 11).unwrap();
        let c: Generator<f32> = Generator::new(tiny(), 12).unwrap();
        let bytes = |g: &Generator<f32>| -> Vec<f32> {
            g.named_parameters().iter().flat_map(|(_, t)| t.to_vec()).collect()
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let g: Generator<f32> = Generator::new(tiny(), 0).unwrap();
        let x = Tensor::zeros(&[1, 500]).unwrap();
        assert!(matches!(g.forward(&x), Err(ModelError::WrongLength { .. })));
    }

    #[test]
    fn invalid_config_lists_violations() {
        let cfg = GeneratorConfig {
            block_kernel: 2,
            frame_len: 10,
            ..Default::default()
        };
        match Generator::<f32>::new(cfg, 0) {
            Err(ModelError::InvalidConfig(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("expected config error, got {:?}", other.err()),
        }
    }

    #[test]
    fn parameter_names_are_unique() {
        let g: Generator<f32> = Generator::new(tiny(), 0).unwrap();
        let names: Vec<String> = g.named_parameters().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        assert!(names.contains(&"blocks.2.depthwise.weight".to_string()));
    }

    #[test]
    fn discriminator_scores_per_item() {
        let d: Discriminator<f32> = Discriminator::new(DiscriminatorConfig::default(), 1024, 5).unwrap();
        let x = Tensor::from_vec((0..3072).map(|i| (i as f32 * 0.003).cos()).collect(), &[3, 1024]).unwrap();
        let y = Tensor::zeros(&[3, 1024]).unwrap();
        let (s, trace) = no_grad(|| d.score_traced(&x, &y)).unwrap();
        assert_eq!(s.shape(), &[3]);
        assert_eq!(trace.first().unwrap(), &vec![2, 1024]);
        assert_eq!(trace[9], vec![1024, 2]);
        assert_eq!(trace.last().unwrap(), &vec![1, 2]);
    }
}
