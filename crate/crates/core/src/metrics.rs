//! Global and segmental SNR, corpus evaluation and the SNR-penalty versus L1 comparison.

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{de_emphasis, frame_signal, overlap_add_average, pre_emphasis, AudioError, Corpus};
use crate::autodiff::{no_grad, Tensor, TensorError};
use crate::losses::PenaltyMode;
use crate::models::{Enhancer, ModelError};
use crate::scalar::Scalar;
use crate::train::{FrameBank, TrainConfig, TrainError, Trainer};

/// Reported in place of +inf when the residual vanishes.
pub const SNR_CAP_DB: f64 = 100.0;
pub const SEG_FRAME: usize = 512;
pub const SEG_FLOOR_DB: f64 = -10.0;
pub const SEG_CEIL_DB: f64 = 35.0;
/// Clean frames with less energy than this are left out of the segmental mean.
pub const SILENCE_ENERGY: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("clean has {clean} samples, estimate has {estimate}")]
    LengthMismatch { clean: usize, estimate: usize },
    #[error("clean reference has zero energy")]
    ZeroEnergy,
    #[error("signal of {len} samples is shorter than one {frame}-sample frame")]
    TooShort { len: usize, frame: usize },
    #[error("no frame of the clean reference is above the silence threshold")]
    NoScorableFrames,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("clip {id}: {source}")]
    Clip { id: String, source: Box<MetricError> },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

fn check_lengths<T: Scalar>(clean: &[T], estimate: &[T]) -> Result<(), MetricError> {
    if clean.len() != estimate.len() {
        return Err(MetricError::LengthMismatch {
            clean: clean.len(),
            estimate: estimate.len(),
        });
    }
    Ok(())
}

/// Signal and residual energies accumulated in f64.
fn energies<T: Scalar>(clean: &[T], estimate: &[T]) -> (f64, f64) {
    clean.iter().zip(estimate).fold((0.0, 0.0), |(s, r), (&c, &e)| {
        let (c, e) = (c.as_f64(), e.as_f64());
        (s + c * c, r + (c - e) * (c - e))
    })
}

/// `10 log10(|x|^2 / |x - x_hat|^2)`, capped at [`SNR_CAP_DB`].
pub fn global_snr<T: Scalar>(clean: &[T], estimate: &[T]) -> Result<f64, MetricError> {
    check_lengths(clean, estimate)?;
    let (signal, residual) = energies(clean, estimate);
    if signal <= 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    Ok((10.0 * (signal / residual).log10()).min(SNR_CAP_DB))
}

/// Mean over non-overlapping 512-sample frames of the per-frame SNR clamped to
/// [-10, 35] dB. A trailing partial frame and silent clean frames are skipped.
pub fn seg_snr<T: Scalar>(clean: &[T], estimate: &[T]) -> Result<f64, MetricError> {
    check_lengths(clean, estimate)?;
    if clean.len() < SEG_FRAME {
        return Err(MetricError::TooShort {
            len: clean.len(),
            frame: SEG_FRAME,
        });
    }
    let mut total = 0.0;
    let mut scored = 0usize;
    for (c, e) in clean.chunks_exact(SEG_FRAME).zip(estimate.chunks_exact(SEG_FRAME)) {
        let (signal, residual) = energies(c, e);
        if signal < SILENCE_ENERGY {
            continue;
        }
        total += (10.0 * (signal / residual).log10()).clamp(SEG_FLOOR_DB, SEG_CEIL_DB);
        scored += 1;
    }
    if scored == 0 {
        return Err(MetricError::NoScorableFrames);
    }
    Ok(total / scored as f64)
}

/// Framing and filtering used when a model is applied to whole clips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceOptions {
    pub frame_shift: usize,
    pub pre_emphasis: f64,
    /// Frames per forward pass.
    pub batch_size: usize,
}

impl From<&TrainConfig> for EnhanceOptions {
    fn from(cfg: &TrainConfig) -> Self {
        EnhanceOptions {
            frame_shift: cfg.frame_shift,
            pre_emphasis: cfg.pre_emphasis,
            batch_size: cfg.batch_size,
        }
    }
}

/// Pre-emphasis, framing, per-frame enhancement, overlap-add averaging and de-emphasis.
/// The output has exactly as many samples as the input.
pub fn enhance_samples<T: Scalar, E: Enhancer<T> + ?Sized>(
    model: &E,
    noisy: &[f64],
    opts: &EnhanceOptions,
) -> Result<Vec<f64>, MetricError> {
    let frame_len = model.frame_len();
    let mut frames = frame_signal(&pre_emphasis(noisy, opts.pre_emphasis), frame_len, opts.frame_shift)?;
    let batch = opts.batch_size.max(1);
    let mut enhanced = Vec::with_capacity(frames.frames.len());
    for chunk in frames.frames.chunks(batch) {
        let flat: Vec<T> = chunk.iter().flatten().map(|&v| T::lit(v)).collect();
        let x = Tensor::from_vec(flat, &[chunk.len(), frame_len])?;
        let y = no_grad(|| model.enhance(&x))?;
        enhanced.extend(y.data().chunks(frame_len).map(|f| f.iter().map(|v| v.as_f64()).collect::<Vec<f64>>()));
    }
    frames.frames = enhanced;
    Ok(de_emphasis(&overlap_add_average(&frames)?, opts.pre_emphasis))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipScore {
    pub id: String,
    pub snr_in_db: f64,
    pub snr_out_db: f64,
    pub segsnr_in_db: f64,
    pub segsnr_out_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clips: Vec<ClipScore>,
    pub mean_snr_in_db: f64,
    pub mean_snr_out_db: f64,
    pub mean_segsnr_in_db: f64,
    pub mean_segsnr_out_db: f64,
    pub config_digest: Option<String>,
    pub penalty_mode: Option<PenaltyMode>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "id,snr_in_db,snr_out_db,segsnr_in_db,segsnr_out_db";

    /// Report over `clips` (sorted by id) with corpus means.
    pub fn from_clips(mut clips: Vec<ClipScore>) -> Self {
        clips.sort_by(|a, b| a.id.cmp(&b.id));
        let n = clips.len().max(1) as f64;
        let mean = |f: fn(&ClipScore) -> f64| clips.iter().map(f).sum::<f64>() / n;
        EvalReport {
            mean_snr_in_db: mean(|c| c.snr_in_db),
            mean_snr_out_db: mean(|c| c.snr_out_db),
            mean_segsnr_in_db: mean(|c| c.segsnr_in_db),
            mean_segsnr_out_db: mean(|c| c.segsnr_out_db),
            clips,
            config_digest: None,
            penalty_mode: None,
        }
    }

    pub fn with_run(self, config_digest: String, penalty_mode: PenaltyMode) -> Self {
        EvalReport {
            config_digest: Some(config_digest),
            penalty_mode: Some(penalty_mode),
            ..self
        }
    }

    pub fn segsnr_gain_db(&self) -> f64 {
        self.mean_segsnr_out_db - self.mean_segsnr_in_db
    }

    pub fn snr_gain_db(&self) -> f64 {
        self.mean_snr_out_db - self.mean_snr_in_db
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per clip under [`Self::CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.clips {
            w.serialize(c).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }
}

/// Scores every pair of `corpus` before and after enhancement by `model`.
pub fn evaluate_corpus<T: Scalar, E: Enhancer<T> + ?Sized>(
    model: &E,
    corpus: &Corpus,
    opts: &EnhanceOptions,
) -> Result<EvalReport, MetricError> {
    let clips = corpus
        .pairs
        .iter()
        .map(|p| {
            let score = || -> Result<ClipScore, MetricError> {
                let (clean, noisy) = (&p.clean.samples, &p.noisy.samples);
                check_lengths(clean, noisy)?;
                let out = enhance_samples(model, noisy, opts)?;
                Ok(ClipScore {
                    id: p.id.clone(),
                    snr_in_db: global_snr(clean, noisy)?,
                    snr_out_db: global_snr(clean, &out)?,
                    segsnr_in_db: seg_snr(clean, noisy)?,
                    segsnr_out_db: seg_snr(clean, &out)?,
                })
            };
            score().map_err(|e| MetricError::Clip {
                id: p.id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_clips(clips))
}

/// Paired frames of every clip, pre-emphasized and cut with the configured shift.
pub fn frame_bank<T: Scalar>(corpus: &Corpus, cfg: &TrainConfig) -> Result<FrameBank<T>, MetricError> {
    let (len, shift) = (cfg.model.frame_len, cfg.frame_shift);
    let mut bank = FrameBank::new(len);
    for p in &corpus.pairs {
        if p.clean.len() != p.noisy.len() {
            return Err(AudioError::PairLength {
                id: p.id.clone(),
                clean: p.clean.len(),
                noisy: p.noisy.len(),
            }
            .into());
        }
        let to_t = |x: &[f64]| -> Vec<T> { pre_emphasis(x, cfg.pre_emphasis).into_iter().map(T::lit).collect() };
        let clean = frame_signal(&to_t(&p.clean.samples), len, shift)?;
        let noisy = frame_signal(&to_t(&p.noisy.samples), len, shift)?;
        for (c, n) in clean.frames.iter().zip(&noisy.frames) {
            bank.push(c, n)?;
        }
    }
    Ok(bank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub snr_mode: EvalReport,
    pub l1_mode: EvalReport,
    /// SNR-mode minus L1-mode mean segSNR.
    pub delta_segsnr_db: f64,
    /// SNR-mode minus L1-mode mean global SNR.
    pub delta_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyComparison {
    pub runs: Vec<SeedComparison>,
    pub mean_segsnr_snr_mode_db: f64,
    pub mean_segsnr_l1_mode_db: f64,
    pub mean_delta_segsnr_db: f64,
    pub mean_delta_snr_db: f64,
    /// Seeds where the SNR penalty scored at least as high a segSNR as L1.
    pub seeds_snr_mode_ahead: usize,
}

impl PenaltyComparison {
    pub fn from_runs(runs: Vec<SeedComparison>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = |f: fn(&SeedComparison) -> f64| runs.iter().map(f).sum::<f64>() / n;
        PenaltyComparison {
            mean_segsnr_snr_mode_db: mean(|r| r.snr_mode.mean_segsnr_out_db),
            mean_segsnr_l1_mode_db: mean(|r| r.l1_mode.mean_segsnr_out_db),
            mean_delta_segsnr_db: mean(|r| r.delta_segsnr_db),
            mean_delta_snr_db: mean(|r| r.delta_snr_db),
            seeds_snr_mode_ahead: runs.iter().filter(|r| r.delta_segsnr_db >= 0.0).count(),
            runs,
        }
    }

    /// Plain-text table, one row per seed and a mean row.
    pub fn table(&self) -> String {
        let mut out = String::from("seed      segsnr_snr  segsnr_l1  delta_segsnr  delta_snr\n");
        for r in &self.runs {
            out += &format!(
                "{:<8}  {:>10.3}  {:>9.3}  {:>12.3}  {:>9.3}\n",
                r.seed, r.snr_mode.mean_segsnr_out_db, r.l1_mode.mean_segsnr_out_db, r.delta_segsnr_db, r.delta_snr_db
            );
        }
        out += &format!(
            "{:<8}  {:>10.3}  {:>9.3}  {:>12.3}  {:>9.3}\n",
            "mean", self.mean_segsnr_snr_mode_db, self.mean_segsnr_l1_mode_db, self.mean_delta_segsnr_db, self.mean_delta_snr_db
        );
        out
    }
}

fn train_and_evaluate<T: Scalar>(cfg: TrainConfig, bank: &FrameBank<T>, corpus: &Corpus) -> Result<EvalReport, MetricError> {
    let mode = cfg.weights.penalty_mode;
    let digest = cfg.digest();
    let opts = EnhanceOptions::from(&cfg);
    let mut trainer = Trainer::<T>::new(cfg)?;
    trainer.run(bank, |_, _| Ok(()))?;
    let (generator, _) = trainer.into_models();
    Ok(evaluate_corpus(&generator, corpus, &opts)?.with_run(digest, mode))
}

/// Trains one model per penalty mode and seed from otherwise identical configurations and
/// evaluates each on `corpus`.
pub fn compare_penalties<T: Scalar>(cfg: &TrainConfig, corpus: &Corpus, seeds: &[u64]) -> Result<PenaltyComparison, MetricError> {
    if seeds.is_empty() {
        return Err(MetricError::NoSeeds);
    }
    let bank = frame_bank::<T>(corpus, cfg)?;
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let with_mode = |penalty_mode| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.weights.penalty_mode = penalty_mode;
            c
        };
        info!("seed {seed}: training with the SNR penalty");
        let snr_mode = train_and_evaluate(with_mode(PenaltyMode::Snr), &bank, corpus)?;
        info!("seed {seed}: training with the L1 penalty");
        let l1_mode = train_and_evaluate(with_mode(PenaltyMode::L1), &bank, corpus)?;
        runs.push(SeedComparison {
            seed,
            delta_segsnr_db: snr_mode.mean_segsnr_out_db - l1_mode.mean_segsnr_out_db,
            delta_snr_db: snr_mode.mean_snr_out_db - l1_mode.mean_snr_out_db,
            snr_mode,
            l1_mode,
        });
    }
    Ok(PenaltyComparison::from_runs(runs))
}
