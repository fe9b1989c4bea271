//! Provenance record emitted by every command.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::failure::{Classify, CmdResult};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub artifacts: Vec<PathBuf>,
    pub tool_version: String,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: None,
            config_digest: None,
            seed: None,
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            artifacts: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Stamps the end time and writes the manifest to `path`, or logs it when no path is given.
    pub fn finish(mut self, path: Option<&Path>) -> CmdResult<()> {
        self.finished_unix_ms = now_ms();
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        match path {
            Some(p) => std::fs::write(p, json + "\n")
                .map_err(|e| anyhow::anyhow!("writing manifest {}: {e}", p.display()))
                .data(),
            None => {
                log::info!("run manifest: {}", serde_json::to_string(&self).expect("manifest serializes"));
                Ok(())
            }
        }
    }
}
