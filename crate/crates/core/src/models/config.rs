use serde::{Deserialize, Serialize};

/// Which feature map the estimated mask multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskTarget {
    /// Mask has `enc_channels` channels and scales the encoder output; the decoder reads
    /// `enc_channels` features per frame.
    #[default]
    EncoderIr,
    /// Mask has `bottleneck_channels` channels and scales the bottleneck output; the
    /// decoder reads `bottleneck_channels` features per frame.
    Bottleneck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub frame_len: usize,
    pub enc_channels: usize,
    pub enc_kernel: usize,
    pub enc_stride: usize,
    pub bottleneck_channels: usize,
    pub block_hidden: usize,
    pub block_kernel: usize,
    pub num_tdcn: usize,
    pub blocks_per_tdcn: usize,
    pub in_eps: f64,
    pub mask_target: MaskTarget,
    /// Instance normalization inside the mask estimator. Turning it off makes every
    /// block a local operator, which is only useful for receptive-field diagnostics.
    pub instance_norm: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            frame_len: 16384,
            enc_channels: 512,
            enc_kernel: 32,
            enc_stride: 16,
            bottleneck_channels: 128,
            block_hidden: 512,
            block_kernel: 3,
            num_tdcn: 4,
            blocks_per_tdcn: 8,
            in_eps: 1e-5,
            mask_target: MaskTarget::EncoderIr,
            instance_norm: true,
        }
    }
}

impl GeneratorConfig {
    /// Returns every violated constraint (empty when valid).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let positive = [
            ("frame_len", self.frame_len),
            ("enc_channels", self.enc_channels),
            ("enc_kernel", self.enc_kernel),
            ("enc_stride", self.enc_stride),
            ("bottleneck_channels", self.bottleneck_channels),
            ("block_hidden", self.block_hidden),
            ("block_kernel", self.block_kernel),
            ("num_tdcn", self.num_tdcn),
            ("blocks_per_tdcn", self.blocks_per_tdcn),
        ];
        for (name, val) in positive {
            if val == 0 {
                v.push(format!("{name} must be >= 1"));
            }
        }
        if self.block_kernel % 2 == 0 {
            v.push(format!("block_kernel must be odd for centered padding, got {}", self.block_kernel));
        }
        if self.enc_kernel > 0 && self.enc_stride > 0 {
            if self.frame_len < self.enc_kernel {
                v.push(format!("frame_len {} shorter than enc_kernel {}", self.frame_len, self.enc_kernel));
            } else if (self.frame_len - self.enc_kernel) % self.enc_stride != 0 {
                v.push(format!(
                    "frame_len - enc_kernel ({}) must be a multiple of enc_stride {}",
                    self.frame_len - self.enc_kernel,
                    self.enc_stride
                ));
            }
            if self.enc_stride > self.enc_kernel {
                v.push(format!("enc_stride {} exceeds enc_kernel {}", self.enc_stride, self.enc_kernel));
            }
        }
        if !(self.in_eps > 0.0) {
            v.push(format!("in_eps must be > 0, got {}", self.in_eps));
        }
        if self.blocks_per_tdcn > 24 {
            v.push(format!("blocks_per_tdcn {} would overflow the dilation schedule", self.blocks_per_tdcn));
        }
        v
    }

    /// Encoder frame count.
    pub fn frames(&self) -> usize {
        (self.frame_len - self.enc_kernel) / self.enc_stride + 1
    }

    /// Dilation of block `m` (0-based) inside a TDCN stack.
    pub fn dilation(&self, m: usize) -> usize {
        1 << m
    }

    pub fn mask_channels(&self) -> usize {
        match self.mask_target {
            MaskTarget::EncoderIr => self.enc_channels,
            MaskTarget::Bottleneck => self.bottleneck_channels,
        }
    }

    /// Small configuration for tests and smoke experiments.
    pub fn tiny(frame_len: usize, enc_channels: usize, bottleneck: usize, hidden: usize, n: usize, m: usize) -> Self {
        GeneratorConfig {
            frame_len,
            enc_channels,
            bottleneck_channels: bottleneck,
            block_hidden: hidden,
            num_tdcn: n,
            blocks_per_tdcn: m,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub in_eps: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            channels: vec![16, 32, 32, 64, 128, 128, 256, 512, 1024],
            kernel: 3,
            stride: 2,
            in_eps: 1e-5,
        }
    }
}

impl DiscriminatorConfig {
    pub fn violations(&self, frame_len: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.channels.is_empty() || self.channels.contains(&0) {
            v.push("discriminator channels must be a nonempty list of positive counts".to_string());
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            v.push(format!("discriminator kernel must be odd, got {}", self.kernel));
        }
        if self.stride == 0 {
            v.push("discriminator stride must be >= 1".to_string());
        }
        if !(self.in_eps > 0.0) {
            v.push(format!("discriminator in_eps must be > 0, got {}", self.in_eps));
        }
        if v.is_empty() && self.temporal_extents(frame_len).last() == Some(&0) {
            v.push(format!("frame_len {frame_len} collapses to nothing through the stride stack"));
        }
        v
    }

    /// Temporal extent after each layer, starting with the input length.
    pub fn temporal_extents(&self, frame_len: usize) -> Vec<usize> {
        let pad = self.kernel / 2;
        let mut lens = vec![frame_len];
        let mut l = frame_len;
        for _ in &self.channels {
            let padded = l + 2 * pad;
            l = if padded >= self.kernel { (padded - self.kernel) / self.stride + 1 } else { 0 };
            lens.push(l);
        }
        lens
    }
}
