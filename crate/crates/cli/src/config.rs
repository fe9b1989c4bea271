//! TOML run configuration.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use tdcgan_core::train::TrainConfig;

use crate::failure::{usage, Classify, CmdResult};

/// Reads a configuration file; missing keys take their defaults, unknown keys are rejected.
pub fn load(path: Option<&Path>) -> CmdResult<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .usage()?;
    toml::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .usage()
}

pub fn validate(cfg: &TrainConfig) -> CmdResult<()> {
    let v = cfg.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(usage(anyhow!("invalid configuration:\n  {}", v.join("\n  "))))
    }
}

pub fn to_toml(cfg: &TrainConfig) -> String {
    toml::to_string_pretty(cfg).expect("config serializes to TOML")
}
