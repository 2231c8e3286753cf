//! Command-line harness for the `ecg-anc` denoising library.
//!
//! Verbs: `decompose`, `denoise`, `sweep`, `select`. Each writes CSV tables
//! and a [`RunManifest`] into `--outdir`.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric divergence.

use std::fmt;

use clap::{Parser, Subcommand};

pub mod commands;
mod manifest;
pub mod plot;
pub mod settings;

pub use manifest::{InputSource, RunManifest, MANIFEST_FILE};
pub use settings::{Settings, StageOverride};

#[derive(Debug, Parser)]
#[command(name = "ecg-anc", version, about = "EMD + adaptive-filter ECG denoising experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the IMFs and residue of one record.
    Decompose(Settings),
    /// Corrupt one record with noise and denoise it with one pipeline.
    Denoise(Settings),
    /// Full factorial record x pipeline x SNR x trial comparison.
    Sweep(Settings),
    /// Score every IMF range (and the whole signal) as filter input for one noise.
    Select(Settings),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const CONFIG: i32 = 2;
    pub const DIVERGED: i32 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ecg_anc::Error> for CliError {
    fn from(e: ecg_anc::Error) -> Self {
        let code = match e {
            ecg_anc::Error::Diverged { .. } => Self::DIVERGED,
            _ => Self::CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub fn run(cli: Cli) -> Result<RunManifest, CliError> {
    match cli.command {
        Command::Decompose(s) => commands::cmd_decompose(&s.resolve()?),
        Command::Denoise(s) => commands::cmd_denoise(&s.resolve()?),
        Command::Sweep(s) => commands::cmd_sweep(&s.resolve()?),
        Command::Select(s) => commands::cmd_select(&s.resolve()?),
    }
}
