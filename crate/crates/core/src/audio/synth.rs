//! Synthetic paired corpus: harmonic tone complexes as a speech surrogate, mixed with
//! filtered random noise at fixed SNR levels.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_at_snr, read_wav, write_wav, AudioClip, AudioError, SAMPLE_RATE};

pub const MANIFEST: &str = "manifest.json";

/// Peak level of the clean clips before mixing.
const CLEAN_PEAK: f64 = 0.5;
/// Mixtures above this peak are scaled down together with their clean reference.
const MAX_PEAK: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Lowpass,
    Bandpass,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Lowpass, NoiseKind::Bandpass];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub snr_db: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub id: String,
    pub clean: AudioClip,
    pub noisy: AudioClip,
    /// Absent for corpora loaded without a manifest.
    pub meta: Option<PairMeta>,
}

/// Paired clean/noisy clips, sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub clips: usize,
    pub seed: u64,
    pub snr_levels: Vec<f64>,
    /// Samples per clip.
    pub clip_len: usize,
    pub sample_rate: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clips: 32,
            seed: 0,
            snr_levels: vec![0.0, 5.0, 10.0, 15.0],
            clip_len: 32768,
            sample_rate: SAMPLE_RATE,
        }
    }
}

fn tone_complex(rng: &mut ChaCha8Rng, len: usize, sr: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut pos = (rng.gen_range(0.0..0.03) * sr) as usize;
    while pos < len {
        let dur = ((rng.gen_range(0.08..0.3) * sr) as usize).min(len - pos);
        let f0 = rng.gen_range(90.0..280.0);
        let glide: f64 = rng.gen_range(-0.15..0.15);
        let amp = rng.gen_range(0.3..1.0);
        let harmonics = ((0.45 * sr / (f0 * (1.0 + glide.max(0.0)))) as usize).clamp(1, 12);
        let weights: Vec<(f64, f64)> = (1..=harmonics)
            .map(|h| (rng.gen_range(0.3..1.0) / h as f64, rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let mut phase = 0.0;
        for i in 0..dur {
            let t = i as f64 / dur as f64;
            let f = f0 * (1.0 + glide * t);
            phase += 2.0 * PI * f / sr;
            let env = (PI * t).sin().powi(2);
            let s: f64 = weights.iter().enumerate().map(|(h, &(w, p))| w * ((h + 1) as f64 * phase + p).sin()).sum();
            out[pos + i] += amp * env * s;
        }
        pos += dur + (rng.gen_range(0.02..0.12) * sr) as usize;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= CLEAN_PEAK / peak);
    }
    out
}

fn noise(rng: &mut ChaCha8Rng, kind: NoiseKind, len: usize, sr: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    match kind {
        NoiseKind::White => white,
        NoiseKind::Lowpass => {
            let a = rng.gen_range(0.9..0.98);
            let mut y = 0.0;
            white.iter().map(|w| {
                y = a * y + (1.0 - a) * w;
                y
            })
            .collect()
        }
        NoiseKind::Bandpass => {
            let centre = rng.gen_range(500.0..3000.0);
            let r: f64 = rng.gen_range(0.95..0.99);
            let (a1, a2) = (2.0 * r * (2.0 * PI * centre / sr).cos(), -r * r);
            let (mut y1, mut y2) = (0.0, 0.0);
            white
                .iter()
                .map(|w| {
                    let y = w + a1 * y1 + a2 * y2;
                    y2 = y1;
                    y1 = y;
                    y
                })
                .collect()
        }
    }
}

/// One pair from its own seed, so any clip can be regenerated from its manifest entry.
pub fn synth_pair(id: &str, meta: &PairMeta, clip_len: usize, sample_rate: u32) -> Result<Pair, AudioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(meta.seed);
    let sr = f64::from(sample_rate);
    let mut clean = tone_complex(&mut rng, clip_len, sr);
    let n = noise(&mut rng, meta.noise_kind, clip_len, sr);
    let (mut noisy, _) = mix_at_snr(&clean, &n, meta.snr_db)?;
    let peak = noisy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > MAX_PEAK {
        let g = MAX_PEAK / peak;
        clean.iter_mut().chain(noisy.iter_mut()).for_each(|v| *v *= g);
    }
    Ok(Pair {
        id: id.to_string(),
        clean: AudioClip::new(id, sample_rate, clean)?,
        noisy: AudioClip::new(id, sample_rate, noisy)?,
        meta: Some(meta.clone()),
    })
}

/// Clip `i` takes SNR level `i mod levels`; noise kind and per-clip seed come from the
/// corpus seed.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<Corpus, AudioError> {
    if cfg.clips == 0 {
        return Err(AudioError::Empty("corpus"));
    }
    if cfg.snr_levels.is_empty() {
        return Err(AudioError::Empty("snr level list"));
    }
    if cfg.clip_len == 0 {
        return Err(AudioError::Empty("clip"));
    }
    if cfg.sample_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs = (0..cfg.clips)
        .map(|i| {
            let meta = PairMeta {
                snr_db: cfg.snr_levels[i % cfg.snr_levels.len()],
                noise_kind: NoiseKind::ALL[(master.next_u32() % 3) as usize],
                seed: master.next_u64(),
            };
            synth_pair(&format!("clip_{i:04}"), &meta, cfg.clip_len, cfg.sample_rate)
        })
        .collect::<Result<_, _>>()?;
    Ok(Corpus { pairs })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AudioError + '_ {
    move |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Writes `clean/<id>.wav`, `noisy/<id>.wav` and, when every pair has metadata,
    /// `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<(), AudioError> {
        for sub in ["clean", "noisy"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        let mut manifest = BTreeMap::new();
        for p in &self.pairs {
            write_wav(&p.clean, &dir.join("clean").join(format!("{}.wav", p.id)))?;
            write_wav(&p.noisy, &dir.join("noisy").join(format!("{}.wav", p.id)))?;
            if let Some(m) = &p.meta {
                manifest.insert(p.id.clone(), m.clone());
            }
        }
        if manifest.len() == self.pairs.len() {
            let path = dir.join(MANIFEST);
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            fs::write(&path, json + "\n").map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Reads a corpus directory. With a manifest the listed ids are loaded; without one,
    /// every `clean/<id>.wav` with a matching `noisy/<id>.wav` is.
    pub fn load(dir: &Path) -> Result<Self, AudioError> {
        let manifest_path = dir.join(MANIFEST);
        let manifest: Option<BTreeMap<String, PairMeta>> = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
            Some(serde_json::from_str(&text).map_err(|e| AudioError::Manifest {
                path: manifest_path.clone(),
                detail: e.to_string(),
            })?)
        } else {
            None
        };
        let ids: Vec<String> = match &manifest {
            Some(m) => m.keys().cloned().collect(),
            None => {
                let clean_dir = dir.join("clean");
                let mut ids = Vec::new();
                for entry in fs::read_dir(&clean_dir).map_err(io_err(&clean_dir))? {
                    let path = entry.map_err(io_err(&clean_dir))?.path();
                    if path.extension().is_some_and(|e| e == "wav") && dir.join("noisy").join(path.file_name().unwrap()).exists() {
                        ids.push(path.file_stem().unwrap().to_string_lossy().into_owned());
                    }
                }
                ids.sort();
                ids
            }
        };
        if ids.is_empty() {
            return Err(AudioError::Manifest {
                path: dir.to_path_buf(),
                detail: "no clean/noisy pairs found".to_string(),
            });
        }
        let pairs = ids
            .into_iter()
            .map(|id| {
                let file = |sub: &str| -> PathBuf { dir.join(sub).join(format!("{id}.wav")) };
                let clean = read_wav(&file("clean"))?;
                let noisy = read_wav(&file("noisy"))?;
                if clean.len() != noisy.len() {
                    return Err(AudioError::PairLength {
                        id,
                        clean: clean.len(),
                        noisy: noisy.len(),
                    });
                }
                let meta = manifest.as_ref().and_then(|m| m.get(&id).cloned());
                Ok(Pair { id, clean, noisy, meta })
            })
            .collect::<Result<_, _>>()?;
        Ok(Corpus { pairs })
    }
}
