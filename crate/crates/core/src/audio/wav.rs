use std::io;
use std::path::Path;

use hound::{SampleFormat, WavSpec};
use log::warn;

use super::{AudioClip, AudioError};

const FULL_SCALE: f64 = 32768.0;

fn classify(path: &Path, e: hound::Error) -> AudioError {
    let path = path.to_path_buf();
    match e {
        hound::Error::IoError(source) if source.kind() == io::ErrorKind::UnexpectedEof => AudioError::Truncated { path },
        hound::Error::IoError(source) => AudioError::Io { path, source },
        hound::Error::FormatError(detail) => AudioError::MalformedHeader {
            path,
            detail: detail.to_string(),
        },
        hound::Error::Unsupported => AudioError::UnsupportedCodec {
            path,
            detail: "format tag".to_string(),
        },
        other => AudioError::MalformedHeader {
            path,
            detail: other.to_string(),
        },
    }
}

/// Reads a 16-bit PCM file, scaling samples by 1/32768. Multi-channel files yield their
/// first channel.
pub fn read_wav(path: &Path) -> Result<AudioClip, AudioError> {
    let reader = hound::WavReader::open(path).map_err(|e| classify(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedCodec {
            path: path.to_path_buf(),
            detail: format!("{:?} with {} bits per sample", spec.sample_format, spec.bits_per_sample),
        });
    }
    let channels = usize::from(spec.channels.max(1));
    if channels > 1 {
        warn!("{}: {} channels, using the first", path.display(), channels);
    }
    let expected = reader.len() as usize;
    let mut samples = Vec::with_capacity(expected / channels);
    let mut read = 0usize;
    for (i, s) in reader.into_samples::<i16>().enumerate() {
        // The header parsed, so a failed read here means the data chunk ended early.
        let s = s.map_err(|e| match e {
            hound::Error::IoError(_) => AudioError::Truncated { path: path.to_path_buf() },
            other => classify(path, other),
        })?;
        if i % channels == 0 {
            samples.push(f64::from(s) / FULL_SCALE);
        }
        read += 1;
    }
    if read < expected {
        return Err(AudioError::Truncated { path: path.to_path_buf() });
    }
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    AudioClip::new(id, spec.sample_rate, samples)
}

/// Writes 16-bit mono PCM, saturating samples outside [-1, 1).
pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<(), AudioError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| classify(path, e))?;
    for &s in &clip.samples {
        let q = (s * FULL_SCALE).round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16;
        w.write_sample(q).map_err(|e| classify(path, e))?;
    }
    w.finalize().map_err(|e| classify(path, e))
}
