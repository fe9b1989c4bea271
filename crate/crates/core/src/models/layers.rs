use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ConvSpec, Result, Tensor};
use crate::scalar::Scalar;

/// Anything that owns named trainable tensors.
pub trait Module<T: Scalar> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>);
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>);

    fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn named_parameters_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        self.collect_mut("", &mut out);
        out
    }

    fn num_parameters(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.numel()).sum()
    }

    fn zero_grad(&self) {
        for (_, p) in self.named_parameters() {
            p.zero_grad();
        }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Seeded source of initial weights.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform<T: Scalar>(&mut self, shape: &[usize], fan_in: usize) -> Tensor<T> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| T::lit(self.rng.gen_range(-bound..bound))).collect();
        Tensor::parameter(data, shape).expect("valid parameter shape")
    }

    pub fn constant<T: Scalar>(&mut self, shape: &[usize], v: f64) -> Tensor<T> {
        let n = shape.iter().product();
        Tensor::parameter(vec![T::lit(v); n], shape).expect("valid parameter shape")
    }
}

pub struct Conv1d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub spec: ConvSpec,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(init: &mut Init, c_in: usize, c_out: usize, kernel: usize, spec: ConvSpec, bias: bool) -> Self {
        let cin_g = c_in / spec.groups;
        let fan_in = cin_g * kernel;
        let weight = init.fan_in_uniform(&[c_out, cin_g, kernel], fan_in);
        let bias = bias.then(|| init.constant(&[c_out], 0.0));
        Conv1d { weight, bias, spec }
    }

    pub fn pointwise(init: &mut Init, c_in: usize, c_out: usize) -> Self {
        Self::new(init, c_in, c_out, 1, ConvSpec::default(), true)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv1d(&self.weight, self.bias.as_ref(), self.spec)
    }
}

impl<T: Scalar> Module<T> for Conv1d<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join(prefix, "weight"), &self.weight));
        if let Some(b) = &self.bias {
            out.push((join(prefix, "bias"), b));
        }
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "weight"), &mut self.weight));
        if let Some(b) = &mut self.bias {
            out.push((join(prefix, "bias"), b));
        }
    }
}

pub struct Linear<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(init: &mut Init, f_in: usize, f_out: usize) -> Self {
        Linear {
            weight: init.fan_in_uniform(&[f_out, f_in], f_in),
            bias: init.constant(&[f_out], 0.0),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.linear(&self.weight, Some(&self.bias))
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join(prefix, "weight"), &self.weight));
        out.push((join(prefix, "bias"), &self.bias));
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "weight"), &mut self.weight));
        out.push((join(prefix, "bias"), &mut self.bias));
    }
}

pub struct InstanceNorm<T: Scalar> {
    pub gain: Tensor<T>,
    pub shift: Tensor<T>,
    pub eps: T,
}

impl<T: Scalar> InstanceNorm<T> {
    pub fn new(init: &mut Init, channels: usize, eps: f64) -> Self {
        InstanceNorm {
            gain: init.constant(&[channels], 1.0),
            shift: init.constant(&[channels], 0.0),
            eps: T::lit(eps),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.instance_norm(&self.gain, &self.shift, self.eps)
    }
}

impl<T: Scalar> Module<T> for InstanceNorm<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join(prefix, "gain"), &self.gain));
        out.push((join(prefix, "shift"), &self.shift));
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "gain"), &mut self.gain));
        out.push((join(prefix, "shift"), &mut self.shift));
    }
}

pub struct PRelu<T: Scalar> {
    pub alpha: Tensor<T>,
}

impl<T: Scalar> PRelu<T> {
    pub fn new(init: &mut Init, channels: usize) -> Self {
        PRelu {
            alpha: init.constant(&[channels], 0.25),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.prelu(&self.alpha)
    }
}

impl<T: Scalar> Module<T> for PRelu<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join(prefix, "alpha"), &self.alpha));
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "alpha"), &mut self.alpha));
    }
}
