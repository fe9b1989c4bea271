use super::config::{GeneratorConfig, MaskTarget};
use super::layers::{join, Conv1d, Init, InstanceNorm, Linear, Module, PRelu};
use super::{Enhancer, ModelError};
use crate::autodiff::{ConvSpec, Tensor};
use crate::scalar::Scalar;

/// Residual 1-D dilated block: 1x1 expand, IN + PReLU, depthwise dilated conv,
/// IN + PReLU, 1x1 project, plus the block input.
pub struct DilatedBlock<T: Scalar> {
    pub in_conv: Conv1d<T>,
    pub norm1: InstanceNorm<T>,
    pub act1: PRelu<T>,
    pub depthwise: Conv1d<T>,
    pub norm2: InstanceNorm<T>,
    pub act2: PRelu<T>,
    pub out_conv: Conv1d<T>,
    use_norm: bool,
}

impl<T: Scalar> DilatedBlock<T> {
    pub fn new(init: &mut Init, cfg: &GeneratorConfig, dilation: usize) -> Self {
        let (io, hidden, k) = (cfg.bottleneck_channels, cfg.block_hidden, cfg.block_kernel);
        let pad = dilation * (k - 1) / 2;
        DilatedBlock {
            in_conv: Conv1d::pointwise(init, io, hidden),
            norm1: InstanceNorm::new(init, hidden, cfg.in_eps),
            act1: PRelu::new(init, hidden),
            depthwise: Conv1d::new(init, hidden, hidden, k, ConvSpec::new(1, dilation, pad, hidden), true),
            norm2: InstanceNorm::new(init, hidden, cfg.in_eps),
            act2: PRelu::new(init, hidden),
            out_conv: Conv1d::pointwise(init, hidden, io),
            use_norm: cfg.instance_norm,
        }
    }

    pub fn dilation(&self) -> usize {
        self.depthwise.spec.dilation
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let norm = |n: &InstanceNorm<T>, h: Tensor<T>| if self.use_norm { n.forward(&h) } else { Ok(h) };
        let h = self.in_conv.forward(x)?;
        let h = self.act1.forward(&norm(&self.norm1, h)?)?;
        let h = self.depthwise.forward(&h)?;
        let h = self.act2.forward(&norm(&self.norm2, h)?)?;
        let h = self.out_conv.forward(&h)?;
        Ok(x.add(&h)?)
    }
}

impl<T: Scalar> Module<T> for DilatedBlock<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.in_conv.collect(&join(prefix, "in_conv"), out);
        self.norm1.collect(&join(prefix, "norm1"), out);
        self.act1.collect(&join(prefix, "act1"), out);
        self.depthwise.collect(&join(prefix, "depthwise"), out);
        self.norm2.collect(&join(prefix, "norm2"), out);
        self.act2.collect(&join(prefix, "act2"), out);
        self.out_conv.collect(&join(prefix, "out_conv"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        self.in_conv.collect_mut(&join(prefix, "in_conv"), out);
        self.norm1.collect_mut(&join(prefix, "norm1"), out);
        self.act1.collect_mut(&join(prefix, "act1"), out);
        self.depthwise.collect_mut(&join(prefix, "depthwise"), out);
        self.norm2.collect_mut(&join(prefix, "norm2"), out);
        self.act2.collect_mut(&join(prefix, "act2"), out);
        self.out_conv.collect_mut(&join(prefix, "out_conv"), out);
    }
}

/// Masking generator: encoder conv, mask estimator (IN + 1x1 bottleneck, stacked dilated
/// blocks, 1x1 + ReLU mask head) and a framewise linear decoder with averaged overlap-add.
pub struct Generator<T: Scalar> {
    cfg: GeneratorConfig,
    pub encoder: Conv1d<T>,
    pub bottleneck_norm: InstanceNorm<T>,
    pub bottleneck: Conv1d<T>,
    pub blocks: Vec<DilatedBlock<T>>,
    pub mask_head: Conv1d<T>,
    pub decoder: Linear<T>,
    inv_coverage: Vec<T>,
}

/// One row of the stage-by-stage shape ledger (per item, batch axis omitted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub name: String,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

impl<T: Scalar> Generator<T> {
    pub fn new(cfg: GeneratorConfig, seed: u64) -> Result<Self, ModelError> {
        let violations = cfg.violations();
        if !violations.is_empty() {
            return Err(ModelError::InvalidConfig(violations));
        }
        let mut init = Init::new(seed);
        let encoder = Conv1d::new(
            &mut init,
            1,
            cfg.enc_channels,
            cfg.enc_kernel,
            ConvSpec::new(cfg.enc_stride, 1, 0, 1),
            false,
        );
        let bottleneck_norm = InstanceNorm::new(&mut init, cfg.enc_channels, cfg.in_eps);
        let bottleneck = Conv1d::pointwise(&mut init, cfg.enc_channels, cfg.bottleneck_channels);
        let mut blocks = Vec::with_capacity(cfg.num_tdcn * cfg.blocks_per_tdcn);
        for _ in 0..cfg.num_tdcn {
            for m in 0..cfg.blocks_per_tdcn {
                blocks.push(DilatedBlock::new(&mut init, &cfg, cfg.dilation(m)));
            }
        }
        let mask_head = Conv1d::pointwise(&mut init, cfg.bottleneck_channels, cfg.mask_channels());
        let decoder = Linear::new(&mut init, cfg.mask_channels(), cfg.enc_kernel);

        let mut coverage = vec![0usize; cfg.frame_len];
        for f in 0..cfg.frames() {
            coverage[f * cfg.enc_stride..f * cfg.enc_stride + cfg.enc_kernel]
                .iter_mut()
                .for_each(|c| *c += 1);
        }
        let inv_coverage = coverage.iter().map(|&c| T::one() / T::lit(c as f64)).collect();
        Ok(Generator {
            cfg,
            encoder,
            bottleneck_norm,
            bottleneck,
            blocks,
            mask_head,
            decoder,
            inv_coverage,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    fn check_input(&self, noisy: &Tensor<T>) -> Result<usize, ModelError> {
        if noisy.rank() != 2 || noisy.shape()[1] != self.cfg.frame_len {
            return Err(ModelError::WrongLength {
                expected: self.cfg.frame_len,
                shape: noisy.shape().to_vec(),
            });
        }
        Ok(noisy.shape()[0])
    }

    /// Encoder output `[B, enc_channels, frames]`.
    pub fn encode(&self, noisy: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let batch = self.check_input(noisy)?;
        Ok(self.encoder.forward(&noisy.reshape(&[batch, 1, self.cfg.frame_len])?)?)
    }

    /// Bottleneck: IN then 1x1 conv to `bottleneck_channels`.
    pub fn bottleneck_forward(&self, ir: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let h = if self.cfg.instance_norm {
            self.bottleneck_norm.forward(ir)?
        } else {
            ir.clone()
        };
        Ok(self.bottleneck.forward(&h)?)
    }

    /// The stacked dilated blocks applied to a bottleneck feature map.
    pub fn tdcn_forward(&self, h: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let mut h = h.clone();
        for block in &self.blocks {
            h = block.forward(&h)?;
        }
        Ok(h)
    }

    /// Framewise linear synthesis followed by overlap-add averaging.
    pub fn decode(&self, features: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let frames = features.swap_last2()?;
        let y = self.decoder.forward(&frames)?.overlap_add(self.cfg.enc_stride)?;
        let norm = Tensor::from_vec(self.inv_coverage.clone(), &[1, self.cfg.frame_len])?;
        Ok(y.mul(&norm)?)
    }

    /// Full forward pass plus the non-negative mask and the per-stage shape ledger.
    pub fn forward_traced(&self, noisy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Vec<Stage>), ModelError> {
        let mut ledger = Vec::new();
        let per_item = |t: &Tensor<T>| t.shape()[1..].to_vec();
        let ir = self.encode(noisy)?;
        ledger.push(Stage {
            name: "encoder".into(),
            input: per_item(noisy),
            output: per_item(&ir),
        });
        let h0 = self.bottleneck_forward(&ir)?;
        ledger.push(Stage {
            name: "bottleneck".into(),
            input: per_item(&ir),
            output: per_item(&h0),
        });
        let mut h = h0.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let next = block.forward(&h)?;
            ledger.push(Stage {
                name: format!(
                    "tdcn{}.block{} (dilation {})",
                    i / self.cfg.blocks_per_tdcn,
                    i % self.cfg.blocks_per_tdcn,
                    block.dilation()
                ),
                input: per_item(&h),
                output: per_item(&next),
            });
            h = next;
        }
        let mask = self.mask_head.forward(&h)?.relu()?;
        ledger.push(Stage {
            name: "mask_head".into(),
            input: per_item(&h),
            output: per_item(&mask),
        });
        let target = match self.cfg.mask_target {
            MaskTarget::EncoderIr => ir,
            MaskTarget::Bottleneck => h0,
        };
        let masked = mask.mul(&target)?;
        ledger.push(Stage {
            name: "masking".into(),
            input: per_item(&target),
            output: per_item(&masked),
        });
        let out = self.decode(&masked)?;
        ledger.push(Stage {
            name: "decoder".into(),
            input: per_item(&masked),
            output: per_item(&out),
        });
        Ok((out, mask, ledger))
    }

    pub fn forward(&self, noisy: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        Ok(self.forward_traced(noisy)?.0)
    }

    /// Shape ledger computed from the configuration alone (no forward pass).
    pub fn shape_ledger(cfg: &GeneratorConfig) -> Vec<Stage> {
        let f = cfg.frames();
        let (e, b, m) = (cfg.enc_channels, cfg.bottleneck_channels, cfg.mask_channels());
        let mut ledger = vec![
            Stage {
                name: "encoder".into(),
                input: vec![cfg.frame_len],
                output: vec![e, f],
            },
            Stage {
                name: "bottleneck".into(),
                input: vec![e, f],
                output: vec![b, f],
            },
        ];
        for n in 0..cfg.num_tdcn {
            for blk in 0..cfg.blocks_per_tdcn {
                ledger.push(Stage {
                    name: format!("tdcn{n}.block{blk} (dilation {})", cfg.dilation(blk)),
                    input: vec![b, f],
                    output: vec![b, f],
                });
            }
        }
        let target = match cfg.mask_target {
            MaskTarget::EncoderIr => e,
            MaskTarget::Bottleneck => b,
        };
        ledger.extend([
            Stage {
                name: "mask_head".into(),
                input: vec![b, f],
                output: vec![m, f],
            },
            Stage {
                name: "masking".into(),
                input: vec![target, f],
                output: vec![m, f],
            },
            Stage {
                name: "decoder".into(),
                input: vec![m, f],
                output: vec![cfg.frame_len],
            },
        ]);
        ledger
    }
}

impl<T: Scalar> Module<T> for Generator<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.encoder.collect(&join(prefix, "encoder"), out);
        self.bottleneck_norm.collect(&join(prefix, "bottleneck_norm"), out);
        self.bottleneck.collect(&join(prefix, "bottleneck"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect(&join(prefix, &format!("blocks.{i}")), out);
        }
        self.mask_head.collect(&join(prefix, "mask_head"), out);
        self.decoder.collect(&join(prefix, "decoder"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        self.encoder.collect_mut(&join(prefix, "encoder"), out);
        self.bottleneck_norm.collect_mut(&join(prefix, "bottleneck_norm"), out);
        self.bottleneck.collect_mut(&join(prefix, "bottleneck"), out);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.collect_mut(&join(prefix, &format!("blocks.{i}")), out);
        }
        self.mask_head.collect_mut(&join(prefix, "mask_head"), out);
        self.decoder.collect_mut(&join(prefix, "decoder"), out);
    }
}

impl<T: Scalar> Enhancer<T> for Generator<T> {
    fn frame_len(&self) -> usize {
        self.cfg.frame_len
    }

    fn enhance(&self, noisy: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        self.forward(noisy)
    }
}
