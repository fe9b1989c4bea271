use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use tdcgan_core::audio::{read_wav, synth_corpus, write_wav, AudioClip, Corpus, SynthConfig, SAMPLE_RATE};
use tdcgan_core::metrics::{frame_bank, EnhanceOptions};
use tdcgan_core::models::{count_parameters, receptive_field, Discriminator, Generator};
use tdcgan_core::train::{Checkpoint, CheckpointError, LogRow, TrainConfig, TrainError, Trainer};

use crate::config;
use crate::failure::{data, usage, Classify, CmdResult, Failure, Kind};
use crate::manifest::RunManifest;
use crate::model::{Identity, Model};
use crate::{EnhanceArgs, EvaluateArgs, InspectArgs, SynthArgs, TrainArgs};

/// Published model size the inspect report compares against.
const REFERENCE_PARAMS: f64 = 5.12e6;

pub const LOSS_LOG: &str = "loss_log.csv";
pub const FINAL_MODEL: &str = "model.ckpt";
pub const RUN_MANIFEST: &str = "run_manifest.json";

fn create_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating directory {}", dir.display()))
        .data()
}

fn write_file(path: &Path, contents: &str) -> CmdResult<()> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .data()
}

fn load_checkpoint(path: &Path) -> CmdResult<Checkpoint> {
    Checkpoint::load(path)
        .with_context(|| format!("loading checkpoint {}", path.display()))
        .data()
}

fn load_corpus(dir: &Path) -> CmdResult<Corpus> {
    if !dir.is_dir() {
        return Err(data(anyhow!("data directory {} does not exist", dir.display())));
    }
    Corpus::load(dir)
        .with_context(|| format!("loading corpus {}", dir.display()))
        .data()
}

pub fn synth(a: &SynthArgs, manifest_path: Option<&Path>) -> CmdResult<()> {
    let mut manifest = RunManifest::start("synth");
    manifest.seed = Some(a.seed);
    let cfg = SynthConfig {
        clips: a.clips as usize,
        seed: a.seed,
        snr_levels: a.snr.clone(),
        clip_len: a.clip_len,
        sample_rate: SAMPLE_RATE,
    };
    let corpus = synth_corpus(&cfg).usage()?;
    create_dir(&a.out)?;
    corpus
        .save(&a.out)
        .with_context(|| format!("writing corpus to {}", a.out.display()))
        .data()?;
    info!("wrote {} pairs to {}", corpus.len(), a.out.display());
    manifest.artifacts = vec![a.out.clone()];
    manifest.finish(manifest_path)
}

/// Keeps the header and the rows up to `step` of an existing log, so a resumed run
/// continues it without duplicates.
fn truncated_log(path: &Path, step: u64) -> CmdResult<String> {
    let mut out = format!("{}\n", LogRow::CSV_HEADER);
    if let Ok(text) = fs::read_to_string(path) {
        for line in text.lines().skip(1) {
            let row_step: u64 = line
                .split(',')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| data(anyhow!("malformed loss log row in {}: {line}", path.display())))?;
            if row_step <= step {
                out += line;
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn io_in_loop(path: &Path, source: std::io::Error) -> TrainError {
    TrainError::Checkpoint(CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn train(a: &TrainArgs, manifest_path: Option<&Path>) -> CmdResult<()> {
    let mut manifest = RunManifest::start("train");
    let mut trainer = match &a.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let mut tr = Trainer::<f32>::from_checkpoint(&ckpt)?;
            let epochs = a.epochs.unwrap_or(tr.config().epochs);
            let max_steps = a.max_steps.or(tr.config().max_steps);
            tr.set_schedule(epochs, max_steps);
            manifest.config_path = Some(path.clone());
            tr
        }
        None => {
            let mut cfg = config::load(a.config.as_deref())?;
            if let Some(p) = a.penalty {
                cfg.weights.penalty_mode = p.into();
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(e) = a.epochs {
                cfg.epochs = e;
            }
            if a.max_steps.is_some() {
                cfg.max_steps = a.max_steps;
            }
            cfg.strict |= a.strict;
            config::validate(&cfg)?;
            manifest.config_path = a.config.clone();
            Trainer::<f32>::new(cfg)?
        }
    };
    let cfg = trainer.config().clone();
    manifest.config_digest = Some(cfg.digest());
    manifest.seed = Some(cfg.seed);

    let corpus = load_corpus(&a.data)?;
    let bank = frame_bank::<f32>(&corpus, &cfg)?;
    info!(
        "{} clips, {} frames of {} samples; penalty {}",
        corpus.len(),
        bank.len(),
        cfg.model.frame_len,
        cfg.weights.penalty_mode.as_str()
    );

    create_dir(&a.out)?;
    let ckpt_dir = a.out.join("checkpoints");
    if cfg.checkpoint_every > 0 {
        create_dir(&ckpt_dir)?;
    }
    let config_path = a.out.join("config.toml");
    write_file(&config_path, &config::to_toml(&cfg))?;

    let log_path = a.out.join(LOSS_LOG);
    let start = if a.resume.is_some() {
        truncated_log(&log_path, trainer.progress().step)?
    } else {
        format!("{}\n", LogRow::CSV_HEADER)
    };
    write_file(&log_path, &start)?;
    let mut log = fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))
        .data()?;

    let mut saved = Vec::new();
    trainer.run(&bank, |tr, row| {
        writeln!(log, "{}", row.csv()).map_err(|e| io_in_loop(&log_path, e))?;
        if row.step % 100 == 0 {
            info!("step {} loss_d {:.4} loss_g {:.4} penalty {:.4}", row.step, row.loss_d, row.loss_g, row.penalty);
        }
        if cfg.checkpoint_every > 0 && row.step % cfg.checkpoint_every == 0 {
            let path = ckpt_dir.join(format!("step_{:06}.ckpt", row.step));
            tr.checkpoint().save(&path)?;
            saved.push(path);
        }
        Ok(())
    })?;
    log.flush().with_context(|| format!("writing {}", log_path.display())).data()?;

    let model_path = a.out.join(FINAL_MODEL);
    trainer
        .checkpoint()
        .save(&model_path)
        .with_context(|| format!("saving {}", model_path.display()))
        .data()?;
    info!("trained {} generator steps; model at {}", trainer.progress().step, model_path.display());

    manifest.artifacts = [config_path, log_path, model_path].into_iter().chain(saved).collect();
    let default_manifest = a.out.join(RUN_MANIFEST);
    manifest.finish(Some(manifest_path.unwrap_or(&default_manifest)))
}

fn enhance_file(model: &Model, opts: &EnhanceOptions, input: &Path, output: &Path) -> CmdResult<()> {
    let clip = read_wav(input).with_context(|| format!("reading {}", input.display())).data()?;
    if clip.is_empty() {
        return Err(data(anyhow!("{} has no samples", input.display())));
    }
    if clip.sample_rate != SAMPLE_RATE {
        warn!("{}: sample rate {} Hz, the model expects {} Hz", input.display(), clip.sample_rate, SAMPLE_RATE);
    }
    let out = model.enhance(&clip.samples, opts).map_err(|e| data(anyhow!("{}: {e}", input.display())))?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Failure {
            kind: Kind::Numerical,
            error: anyhow!("{}: enhanced signal is not finite", input.display()),
        });
    }
    let enhanced = AudioClip::new(clip.id, clip.sample_rate, out).data()?;
    write_wav(&enhanced, output).with_context(|| format!("writing {}", output.display())).data()
}

fn wav_files(dir: &Path) -> CmdResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display())).data()?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("listing {}", dir.display())).data()?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn enhance(a: &EnhanceArgs, manifest_path: Option<&Path>) -> CmdResult<()> {
    let mut manifest = RunManifest::start("enhance");
    let ckpt = load_checkpoint(&a.model)?;
    manifest.config_path = Some(a.model.clone());
    manifest.config_digest = Some(ckpt.digest.clone());
    manifest.seed = Some(ckpt.config.seed);
    let model = Model::from_checkpoint(&ckpt)?;
    let opts = EnhanceOptions::from(&ckpt.config);

    if !a.input.exists() {
        return Err(data(anyhow!("input {} does not exist", a.input.display())));
    }
    if a.input.is_dir() {
        create_dir(&a.out)?;
        let mut failed = 0usize;
        for input in wav_files(&a.input)? {
            let output = a.out.join(input.file_name().expect("listed files have names"));
            match enhance_file(&model, &opts, &input, &output) {
                Ok(()) => manifest.artifacts.push(output),
                Err(f) if a.continue_on_error => {
                    warn!("skipping {}: {:#}", input.display(), f.error);
                    failed += 1;
                }
                Err(f) => return Err(f),
            }
        }
        info!("enhanced {} files into {}", manifest.artifacts.len(), a.out.display());
        if failed > 0 {
            return Err(data(anyhow!("{failed} file(s) could not be enhanced")));
        }
    } else {
        if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        enhance_file(&model, &opts, &a.input, &a.out)?;
        manifest.artifacts.push(a.out.clone());
    }
    manifest.finish(manifest_path)
}

pub fn evaluate(a: &EvaluateArgs, manifest_path: Option<&Path>) -> CmdResult<()> {
    let mut manifest = RunManifest::start("evaluate");
    let (model, cfg, ckpt_digest) = match &a.model {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            manifest.config_path = Some(path.clone());
            (Model::from_checkpoint(&ckpt)?, ckpt.config.clone(), Some(ckpt.digest))
        }
        None => {
            let cfg = config::load(a.config.as_deref())?;
            config::validate(&cfg)?;
            manifest.config_path = a.config.clone();
            let identity = Identity {
                frame_len: cfg.model.frame_len,
            };
            (Model::Identity(identity), cfg, None)
        }
    };
    manifest.config_digest = Some(cfg.digest());
    manifest.seed = Some(cfg.seed);
    let corpus = load_corpus(&a.data)?;
    let mut report = model.evaluate(&corpus, &EnhanceOptions::from(&cfg))?;
    if let Some(digest) = ckpt_digest {
        report = report.with_run(digest, cfg.weights.penalty_mode);
    }
    if let Some(parent) = a.report.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let csv_path = a.report.with_extension("csv");
    write_file(&a.report, &(report.to_json() + "\n"))?;
    write_file(&csv_path, &report.to_csv())?;
    println!(
        "{} clips: segSNR {:.3} -> {:.3} dB ({:+.3}), SNR {:.3} -> {:.3} dB ({:+.3})",
        report.clips.len(),
        report.mean_segsnr_in_db,
        report.mean_segsnr_out_db,
        report.segsnr_gain_db(),
        report.mean_snr_in_db,
        report.mean_snr_out_db,
        report.snr_gain_db()
    );
    manifest.artifacts = vec![a.report.clone(), csv_path];
    manifest.finish(manifest_path)
}

fn shape(dims: &[usize]) -> String {
    format!("[{}]", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "))
}

pub fn inspect_report(cfg: &TrainConfig) -> CmdResult<String> {
    let g = Generator::<f32>::new(cfg.model.clone(), 0).map_err(usage)?;
    let d = Discriminator::<f32>::new(cfg.discriminator.clone(), cfg.model.frame_len, 0).map_err(usage)?;
    let mut out = format!("config digest {}\n\ngenerator shape ledger (per item)\n", cfg.digest());
    for s in Generator::<f32>::shape_ledger(&cfg.model) {
        out += &format!("  {:<28} {:>14} -> {}\n", s.name, shape(&s.input), shape(&s.output));
    }
    out += "\ndiscriminator shape ledger (per item)\n";
    let extents = cfg.discriminator.temporal_extents(cfg.model.frame_len);
    let mut channels = vec![2];
    channels.extend(&cfg.discriminator.channels);
    for (i, (c, l)) in channels.iter().zip(&extents).enumerate().skip(1) {
        out += &format!(
            "  {:<28} {:>14} -> {}\n",
            format!("dsc{}", i - 1),
            shape(&[channels[i - 1], extents[i - 1]]),
            shape(&[*c, *l])
        );
    }
    let last = *extents.last().expect("at least the input extent");
    out += &format!("  {:<28} {:>14} -> {}\n", "head", shape(&[*channels.last().unwrap(), last]), shape(&[1, last]));
    out += &format!("  {:<28} {:>14} -> {}\n", "fc", shape(&[last]), shape(&[1]));

    let rf = receptive_field(&cfg.model);
    out += &format!("\nreceptive field: {} frames / {} samples (centered)\n\nparameters\n", rf.frames, rf.samples);
    let (gp, dp) = (count_parameters(&g), count_parameters(&d));
    for (prefix, report) in [("generator", &gp), ("discriminator", &dp)] {
        for (name, n) in &report.groups {
            out += &format!("  {:<28} {:>10}\n", format!("{prefix}.{name}"), n);
        }
        out += &format!("  {:<28} {:>10}\n", format!("{prefix} total"), report.total);
    }
    let total = gp.total + dp.total;
    let within = ((total as f64 - REFERENCE_PARAMS) / REFERENCE_PARAMS).abs() <= 0.1;
    out += &format!(
        "  {:<28} {:>10}\n\ntotal {} = {:.3}e6; within 10% of 5.12e6: {}\n",
        "total",
        total,
        total,
        total as f64 / 1e6,
        if within { "yes" } else { "no" }
    );
    Ok(out)
}

pub fn inspect(a: &InspectArgs, manifest_path: Option<&Path>) -> CmdResult<()> {
    let mut manifest = RunManifest::start("inspect");
    let cfg = match (&a.model, &a.config) {
        (Some(path), _) => {
            manifest.config_path = Some(path.clone());
            load_checkpoint(path)?.config
        }
        (None, path) => {
            manifest.config_path = path.clone();
            let cfg = config::load(path.as_deref())?;
            config::validate(&cfg)?;
            cfg
        }
    };
    manifest.config_digest = Some(cfg.digest());
    print!("{}", inspect_report(&cfg)?);
    manifest.finish(manifest_path)
}
