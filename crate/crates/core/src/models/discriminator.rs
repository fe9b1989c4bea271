use super::config::DiscriminatorConfig;
use super::layers::{join, Conv1d, Init, InstanceNorm, Linear, Module, PRelu};
use super::{Critic, ModelError};
use crate::autodiff::{ConvSpec, Tensor};
use crate::scalar::Scalar;

/// Depthwise (strided) conv, pointwise conv, IN, PReLU.
pub struct DscLayer<T: Scalar> {
    pub depthwise: Conv1d<T>,
    pub pointwise: Conv1d<T>,
    pub norm: InstanceNorm<T>,
    pub act: PRelu<T>,
}

impl<T: Scalar> DscLayer<T> {
    fn new(init: &mut Init, c_in: usize, c_out: usize, cfg: &DiscriminatorConfig) -> Self {
        let spec = ConvSpec::new(cfg.stride, 1, cfg.kernel / 2, c_in);
        DscLayer {
            depthwise: Conv1d::new(init, c_in, c_in, cfg.kernel, spec, true),
            pointwise: Conv1d::pointwise(init, c_in, c_out),
            norm: InstanceNorm::new(init, c_out, cfg.in_eps),
            act: PRelu::new(init, c_out),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let h = self.pointwise.forward(&self.depthwise.forward(x)?)?;
        Ok(self.act.forward(&self.norm.forward(&h)?)?)
    }
}

impl<T: Scalar> Module<T> for DscLayer<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.depthwise.collect(&join(prefix, "depthwise"), out);
        self.pointwise.collect(&join(prefix, "pointwise"), out);
        self.norm.collect(&join(prefix, "norm"), out);
        self.act.collect(&join(prefix, "act"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        self.depthwise.collect_mut(&join(prefix, "depthwise"), out);
        self.pointwise.collect_mut(&join(prefix, "pointwise"), out);
        self.norm.collect_mut(&join(prefix, "norm"), out);
        self.act.collect_mut(&join(prefix, "act"), out);
    }
}

/// Conditional critic over (candidate, noisy) waveform pairs stacked as two channels.
/// Scores are unbounded reals.
pub struct Discriminator<T: Scalar> {
    cfg: DiscriminatorConfig,
    frame_len: usize,
    pub layers: Vec<DscLayer<T>>,
    pub head: Conv1d<T>,
    pub fc: Linear<T>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(cfg: DiscriminatorConfig, frame_len: usize, seed: u64) -> Result<Self, ModelError> {
        let violations = cfg.violations(frame_len);
        if !violations.is_empty() {
            return Err(ModelError::InvalidConfig(violations));
        }
        let mut init = Init::new(seed);
        let mut layers = Vec::with_capacity(cfg.channels.len());
        let mut c_in = 2;
        for &c_out in &cfg.channels {
            layers.push(DscLayer::new(&mut init, c_in, c_out, &cfg));
            c_in = c_out;
        }
        let head = Conv1d::pointwise(&mut init, c_in, 1);
        let final_len = *cfg.temporal_extents(frame_len).last().unwrap();
        let fc = Linear::new(&mut init, final_len, 1);
        Ok(Discriminator {
            cfg,
            frame_len,
            layers,
            head,
            fc,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Per-item scores `[B]` plus the `[channels, length]` shape after every stage.
    pub fn score_traced(&self, candidate: &Tensor<T>, noisy: &Tensor<T>) -> Result<(Tensor<T>, Vec<Vec<usize>>), ModelError> {
        if candidate.shape() != noisy.shape() {
            return Err(ModelError::Tensor(crate::autodiff::TensorError::ShapeMismatch {
                op: "discriminator",
                lhs: candidate.shape().to_vec(),
                rhs: noisy.shape().to_vec(),
            }));
        }
        if candidate.rank() != 2 || candidate.shape()[1] != self.frame_len {
            return Err(ModelError::WrongLength {
                expected: self.frame_len,
                shape: candidate.shape().to_vec(),
            });
        }
        let (batch, len) = (candidate.shape()[0], candidate.shape()[1]);
        let mut h = Tensor::concat(
            &[&candidate.reshape(&[batch, 1, len])?, &noisy.reshape(&[batch, 1, len])?],
            1,
        )?;
        let mut trace = vec![h.shape()[1..].to_vec()];
        for layer in &self.layers {
            h = layer.forward(&h)?;
            trace.push(h.shape()[1..].to_vec());
        }
        let h = self.head.forward(&h)?;
        trace.push(h.shape()[1..].to_vec());
        let t = h.shape()[2];
        let score = self.fc.forward(&h.reshape(&[batch, t])?)?.reshape(&[batch])?;
        Ok((score, trace))
    }
}

impl<T: Scalar> Critic<T> for Discriminator<T> {
    fn score(&self, candidate: &Tensor<T>, noisy: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        Ok(self.score_traced(candidate, noisy)?.0)
    }
}

impl<T: Scalar> Module<T> for Discriminator<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.collect(&join(prefix, &format!("layers.{i}")), out);
        }
        self.head.collect(&join(prefix, "head"), out);
        self.fc.collect(&join(prefix, "fc"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.collect_mut(&join(prefix, &format!("layers.{i}")), out);
        }
        self.head.collect_mut(&join(prefix, "head"), out);
        self.fc.collect_mut(&join(prefix, "fc"), out);
    }
}
