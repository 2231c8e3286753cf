use std::fs;
use std::path::{Path, PathBuf};

use ecg_anc::pipelines::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::settings::Settings;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every run's outputs. `settings` holds the merged flags and
/// config, so `--config manifest.json` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputSource>,
    pub pipelines: Vec<PipelineConfig>,
    pub seeds: Vec<u64>,
    pub outdir: PathBuf,
    pub outputs: Vec<String>,
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputSource {
    File {
        id: String,
        path: PathBuf,
        channel: Option<usize>,
    },
    Synthetic {
        id: String,
        fs: f64,
        samples: usize,
        bpm: f64,
    },
}

impl RunManifest {
    pub fn new(command: &str, settings: &Settings) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: Vec::new(),
            pipelines: Vec::new(),
            seeds: Vec::new(),
            outdir: settings.outdir(),
            outputs: Vec::new(),
            settings: Settings {
                config: None,
                ..settings.clone()
            },
        }
    }

    pub fn write(&mut self, dir: &Path) -> Result<(), CliError> {
        self.outputs.push(MANIFEST_FILE.to_string());
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::config(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}
