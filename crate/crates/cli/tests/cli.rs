//! End-to-end behavior of the `tdcgan` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tdcgan_core::audio::{read_wav, write_wav, AudioClip};
use tdcgan_core::train::TrainConfig;

const TINY: &str = "epochs = 0
batch_size = 2
frame_shift = 256
checkpoint_every = 0

[model]
frame_len = 512
enc_channels = 8
bottleneck_channels = 4
block_hidden = 8
num_tdcn = 1
blocks_per_tdcn = 2
";

fn tdcgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdcgan"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tdcgan(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, clips: &str, clip_len: &str) {
    ok(&["synth", "--out", s(dir), "--clips", clips, "--clip-len", clip_len, "--seed", "3"]);
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_default_config_is_the_builtin_default() {
    let text = fs::read_to_string(repo_file("configs/default.toml")).unwrap();
    let cfg: TrainConfig = toml::from_str(&text).unwrap();
    assert_eq!(cfg, TrainConfig::default());
    assert_eq!((cfg.epochs, cfg.batch_size, cfg.frame_shift), (100, 16, 8192));
    assert_eq!((cfg.weights.lambda_snr, cfg.weights.lambda_l1, cfg.weights.gamma), (10.0, 100.0, 10.0));
    assert_eq!((cfg.pre_emphasis, cfg.model.frame_len), (0.95, 16384));
    ok(&["inspect", "--config", s(&repo_file("configs/smoke.toml"))]);
}

#[test]
fn inspect_reports_field_and_size() {
    let text = ok(&["inspect"]);
    assert!(text.contains("2041 frames / 32672 samples"), "{text}");
    assert!(text.contains("total 5274986"), "{text}");
    assert!(text.contains("within 10% of 5.12e6: yes"));
}

#[test]
fn synth_is_seeded_and_labelled() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["synth", "--out", s(dir), "--clips", "4", "--snr", "0,15", "--clip-len", "4000", "--seed", "9"]);
    }
    for sub in ["clean", "noisy"] {
        let names: Vec<_> = fs::read_dir(a.join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 4);
        for n in names {
            assert_eq!(fs::read(a.join(sub).join(&n)).unwrap(), fs::read(b.join(sub).join(&n)).unwrap());
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let snrs: Vec<f64> = (0..4)
        .map(|i| manifest[format!("clip_{i:04}")]["snr_db"].as_f64().unwrap())
        .collect();
    assert_eq!(snrs, vec![0.0, 15.0, 0.0, 15.0]);

    let out = tdcgan(&["synth", "--out", s(&tmp.path().join("c")), "--clips", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_classifies_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let out = tdcgan(&["train", "--data", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));

    let bad = write_config(tmp.path(), "batch_size = 0\nlr_gen = -1.0\n");
    let out = tdcgan(&["train", "--config", s(&bad), "--data", s(tmp.path()), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("batch_size") && err.contains("lr_gen"), "{err}");

    let unknown = write_config(tmp.path(), "epoch = 3\n");
    let out = tdcgan(&["train", "--config", s(&unknown), "--data", s(tmp.path()), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn penalty_flag_changes_exactly_one_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2", "1200");
    let cfg = write_config(tmp.path(), TINY);
    let mut configs = Vec::new();
    for mode in ["snr", "l1"] {
        let out = tmp.path().join(mode);
        ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&out), "--penalty", mode]);
        configs.push(fs::read_to_string(out.join("config.toml")).unwrap());
    }
    let diff: Vec<(&str, &str)> = configs[0]
        .lines()
        .zip(configs[1].lines())
        .filter(|(a, b)| a != b)
        .collect();
    assert_eq!(diff, vec![("penalty_mode = \"snr\"", "penalty_mode = \"l1\"")]);
}

#[test]
fn enhance_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "1500");
    let cfg = write_config(tmp.path(), TINY);
    let run = tmp.path().join("run");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&run), "--max-steps", "2", "--epochs", "1"]);
    let model = run.join("model.ckpt");
    assert!(run.join("run_manifest.json").is_file());

    let odd: Vec<f64> = (0..1001).map(|i| (i as f64 * 0.05).sin() * 0.3).collect();
    let input = tmp.path().join("odd.wav");
    write_wav(&AudioClip::new("odd", 16000, odd).unwrap(), &input).unwrap();
    let zero = tmp.path().join("zero.wav");
    write_wav(&AudioClip::new("zero", 16000, vec![0.0; 700]).unwrap(), &zero).unwrap();
    for (wav, len) in [(&input, 1001), (&zero, 700)] {
        let out = tmp.path().join("out").join(wav.file_name().unwrap());
        ok(&["enhance", "--model", s(&model), "--in", s(wav), "--out", s(&out)]);
        assert_eq!(read_wav(&out).unwrap().len(), len);
    }
    let dir_out = tmp.path().join("enhanced");
    ok(&["enhance", "--model", s(&model), "--in", s(&data.join("noisy")), "--out", s(&dir_out)]);
    assert_eq!(fs::read_dir(&dir_out).unwrap().count(), 3);

    let report = tmp.path().join("eval/report.json");
    let manifest = tmp.path().join("eval_manifest.json");
    let text = ok(&["--manifest", s(&manifest), "evaluate", "--model", s(&model), "--data", s(&data), "--report", s(&report)]);
    assert!(text.starts_with("3 clips"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["clips"].as_array().unwrap().len(), 3);
    assert_eq!(json["penalty_mode"], "snr");
    let csv = fs::read_to_string(report.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let run_manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(run_manifest["command"], "evaluate");
}

#[test]
fn identity_evaluation_is_neutral() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2", "3000");
    let cfg = write_config(tmp.path(), TINY);
    let report = tmp.path().join("r.json");
    ok(&["evaluate", "--identity", "--config", s(&cfg), "--data", s(&data), "--report", s(&report)]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for clip in json["clips"].as_array().unwrap() {
        let (a, b) = (clip["segsnr_in_db"].as_f64().unwrap(), clip["segsnr_out_db"].as_f64().unwrap());
        assert!((a - b).abs() < 1e-6, "{clip}");
    }
}

#[test]
fn divergent_training_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2", "1200");
    let cfg = write_config(tmp.path(), &TINY.replace("epochs = 0", "epochs = 50\nlr_gen = 1e30\nlr_disc = 1e30"));
    let out = tdcgan(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_model_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tdcgan(&[
        "enhance",
        "--model",
        s(&tmp.path().join("none.ckpt")),
        "--in",
        s(tmp.path()),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 3);
}
