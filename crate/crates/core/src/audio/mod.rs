//! Waveform plumbing: WAV I/O, pre-emphasis, framing with overlap-add averaging, SNR
//! mixing and a synthetic paired corpus.
//!
//! Clips are held in `f64`; the framing and filtering helpers are generic over [`Scalar`]
//! and accumulate in `f64`.

mod synth;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use synth::{synth_corpus, synth_pair, Corpus, NoiseKind, Pair, PairMeta, SynthConfig, MANIFEST};
pub use wav::{read_wav, write_wav};

use crate::scalar::Scalar;

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed WAV header: {detail}", .path.display())]
    MalformedHeader { path: PathBuf, detail: String },
    #[error("{}: unsupported codec: {detail} (only 16-bit PCM is read)", .path.display())]
    UnsupportedCodec { path: PathBuf, detail: String },
    #[error("{}: sample data truncated", .path.display())]
    Truncated { path: PathBuf },
    #[error("clip {id}: sample {index} is not finite")]
    NonFinite { id: String, index: usize },
    #[error("sample rate must be > 0")]
    InvalidSampleRate,
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("{0} has zero energy")]
    ZeroEnergy(&'static str),
    #[error("frame {index} has length {got}, expected {expected}")]
    FrameLength { index: usize, expected: usize, got: usize },
    #[error("invalid framing: frame_len {frame_len}, shift {shift}")]
    InvalidFraming { frame_len: usize, shift: usize },
    #[error("pair {id}: clean has {clean} samples, noisy has {noisy}")]
    PairLength { id: String, clean: usize, noisy: usize },
    #[error("{}: {detail}", .path.display())]
    Manifest { path: PathBuf, detail: String },
}

/// Mono waveform with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, sample_rate: u32, samples: Vec<f64>) -> Result<Self, AudioError> {
        let id = id.into();
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite { id, index });
        }
        Ok(AudioClip { id, sample_rate, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - c * x[n-1]`.
pub fn pre_emphasis<T: Scalar>(x: &[T], c: f64) -> Vec<T> {
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            let v = v.as_f64();
            let y = v - c * prev;
            prev = v;
            T::lit(y)
        })
        .collect()
}

/// Recursive inverse of [`pre_emphasis`]: `x[n] = y[n] + c * x[n-1]`.
pub fn de_emphasis<T: Scalar>(y: &[T], c: f64) -> Vec<T> {
    let mut prev = 0.0;
    y.iter()
        .map(|&v| {
            prev = v.as_f64() + c * prev;
            T::lit(prev)
        })
        .collect()
}

/// Fixed-length windows cut from a signal, with the bookkeeping needed to undo the tail
/// padding.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet<T: Scalar> {
    pub frames: Vec<Vec<T>>,
    pub frame_len: usize,
    pub shift: usize,
    pub original_length: usize,
    pub pad_amount: usize,
}

/// Number of frames needed to cover `len` samples.
pub fn frame_count(len: usize, frame_len: usize, shift: usize) -> usize {
    len.saturating_sub(frame_len).div_ceil(shift) + 1
}

/// Cuts `x` into frames of `frame_len` every `shift` samples, zero-padding the tail to
/// the next full frame.
pub fn frame_signal<T: Scalar>(x: &[T], frame_len: usize, shift: usize) -> Result<FrameSet<T>, AudioError> {
    if frame_len == 0 || shift == 0 || shift > frame_len {
        return Err(AudioError::InvalidFraming { frame_len, shift });
    }
    if x.is_empty() {
        return Err(AudioError::Empty("signal"));
    }
    let n = frame_count(x.len(), frame_len, shift);
    let padded = (n - 1) * shift + frame_len;
    let mut buf = x.to_vec();
    buf.resize(padded, T::zero());
    let frames = (0..n).map(|i| buf[i * shift..][..frame_len].to_vec()).collect();
    Ok(FrameSet {
        frames,
        frame_len,
        shift,
        original_length: x.len(),
        pad_amount: padded - x.len(),
    })
}

/// Reassembles a signal of `original_length` samples; every sample is the mean of the
/// frame samples covering it.
pub fn overlap_add_average<T: Scalar>(fs: &FrameSet<T>) -> Result<Vec<T>, AudioError> {
    if fs.frames.is_empty() {
        return Err(AudioError::Empty("frame set"));
    }
    if fs.shift == 0 || fs.shift > fs.frame_len {
        return Err(AudioError::InvalidFraming {
            frame_len: fs.frame_len,
            shift: fs.shift,
        });
    }
    let padded = (fs.frames.len() - 1) * fs.shift + fs.frame_len;
    let mut sum = vec![0.0f64; padded];
    let mut count = vec![0u32; padded];
    for (index, frame) in fs.frames.iter().enumerate() {
        if frame.len() != fs.frame_len {
            return Err(AudioError::FrameLength {
                index,
                expected: fs.frame_len,
                got: frame.len(),
            });
        }
        let start = index * fs.shift;
        for (j, &v) in frame.iter().enumerate() {
            sum[start + j] += v.as_f64();
            count[start + j] += 1;
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .take(fs.original_length.min(padded))
        .map(|(&s, &c)| T::lit(s / f64::from(c)))
        .collect())
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `speech + g * noise` with `g` chosen so the speech-to-scaled-noise energy ratio equals
/// `snr_db`. Noise shorter than the speech is tiled. Returns the mixture and `g`.
pub fn mix_at_snr(speech: &[f64], noise: &[f64], snr_db: f64) -> Result<(Vec<f64>, f64), AudioError> {
    if speech.is_empty() {
        return Err(AudioError::Empty("speech"));
    }
    if noise.is_empty() {
        return Err(AudioError::Empty("noise"));
    }
    let noise: Vec<f64> = noise.iter().copied().cycle().take(speech.len()).collect();
    let (es, en) = (energy(speech), energy(&noise));
    if es <= 0.0 {
        return Err(AudioError::ZeroEnergy("speech"));
    }
    if en <= 0.0 {
        return Err(AudioError::ZeroEnergy("noise"));
    }
    let gain = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = speech.iter().zip(&noise).map(|(s, n)| s + gain * n).collect();
    Ok((mixed, gain))
}
