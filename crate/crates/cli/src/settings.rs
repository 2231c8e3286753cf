//! Flags shared by every verb, and their TOML / JSON config-file mirror.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args};
use ecg_anc::adaptive::{Algorithm, FilterSpec, StepMode};
use ecg_anc::emd::SiftConfig;
use ecg_anc::noise::{NoiseKind, ReferenceSpec};
use ecg_anc::pipelines::{ImfSelection, PipelineConfig, PipelineKind, Stage};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every option can also be given in the `--config` file under the same
/// name (`snr-in = [5, 10]`); flags win on conflict.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Clean record: CSV, or a WFDB header (`.hea`) with format-212 data. Repeatable.
    #[arg(long, value_name = "PATH")]
    pub input: Option<Vec<PathBuf>>,
    /// CSV column to read, by index or header name [default: 0].
    #[arg(long)]
    pub column: Option<String>,
    /// WFDB channel to read [default: 0].
    #[arg(long)]
    pub channel: Option<usize>,
    /// Sampling rate in Hz; overrides a `# fs=` CSV comment [default for synthetic ECG: 360].
    #[arg(long)]
    pub fs: Option<f64>,
    /// Use a synthetic ECG as the clean record.
    #[arg(long, action = ArgAction::SetTrue)]
    pub synthetic_ecg: bool,
    /// Synthetic ECG length in seconds [default: 10].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Synthetic ECG heart rate [default: 72].
    #[arg(long)]
    pub bpm: Option<f64>,
    /// Noise kinds to add: bw, pli, em, ma.
    #[arg(long, value_delimiter = ',')]
    pub noises: Option<Vec<NoiseKind>>,
    /// Recorded noise source as `kind=path` (CSV or .hea); synthetic otherwise. Repeatable.
    #[arg(long, value_name = "KIND=PATH")]
    pub noise_file: Option<Vec<String>>,
    /// Input SNR in dB; a list for sweeps [default: 10, sweep: 5,10,15].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_in: Option<Vec<f64>>,
    /// Pipeline: bwpli, sdaf, pdaf, seaf, peaf; a list for sweeps [sweep default: sdaf,pdaf,seaf,peaf].
    #[arg(long, value_delimiter = ',')]
    pub pipeline: Option<Vec<PipelineKind>>,
    /// Adaptive algorithm [default: lms].
    #[arg(long)]
    pub algo: Option<Algorithm>,
    /// Filter length [default: 32].
    #[arg(long)]
    pub taps: Option<usize>,
    /// Step size [default: 0.01 for LMS, 0.5 for NLMS].
    #[arg(long)]
    pub mu: Option<f64>,
    /// LMS step interpretation: fixed or ref-power [default: fixed].
    #[arg(long)]
    pub step_mode: Option<StepMode>,
    /// NLMS regularizer [default: 1e-6].
    #[arg(long)]
    pub eps: Option<f64>,
    /// RLS forgetting factor [default: 0.999].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// RLS inverse-correlation initializer [default: 100].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Reference circular shift in samples [default: 200].
    #[arg(long)]
    pub ref_shift: Option<usize>,
    /// Reference FIR taps [default: 0.1,0.2,0.4,0.2,0.1].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub ref_fir: Option<Vec<f64>>,
    /// SDAF cascade order [default: bw,pli,em,ma].
    #[arg(long, value_delimiter = ',')]
    pub sdaf_order: Option<Vec<NoiseKind>>,
    /// Leading samples left out of the metrics [default: 0].
    #[arg(long)]
    pub skip_samples: Option<usize>,
    #[arg(long)]
    pub sd_threshold: Option<f64>,
    #[arg(long)]
    pub max_sift_iterations: Option<usize>,
    #[arg(long)]
    pub max_imfs: Option<usize>,
    #[arg(long)]
    pub boundary_mirror: Option<usize>,
    /// Seed for synthetic noise; required whenever synthetic noise is used.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per (record, SNR) in sweeps; trial t uses seed + t [default: 5].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads for sweeps [default: all cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, action = ArgAction::SetTrue)]
    pub plot: bool,
    /// Output directory [default: ecg-anc-out].
    #[arg(long)]
    pub outdir: Option<PathBuf>,
    /// Per-stage filter overrides (config file only), e.g. `[stages.pli] taps = 2`.
    #[arg(skip)]
    pub stages: Option<BTreeMap<Stage, StageOverride>>,
    /// IMF ranges per noise kind (config file only), e.g. `[selection] bw = "4..8"`.
    #[arg(skip)]
    pub selection: Option<ImfSelection>,
    /// TOML config file, or a `manifest.json` from an earlier run.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Filter parameters for one stage; unset fields fall back to the global ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct StageOverride {
    pub algo: Option<Algorithm>,
    pub taps: Option<usize>,
    pub mu: Option<f64>,
    pub step_mode: Option<StepMode>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*; $($flag:ident),*) => {
        Settings {
            $($f: $a.$f.or($b.$f),)*
            $($flag: $a.$flag || $b.$flag,)*
            config: $a.config,
        }
    };
}

impl Settings {
    /// Fills unset flags from the config file named by `--config`.
    pub fn resolve(self) -> Result<Settings, CliError> {
        match &self.config {
            Some(path) => {
                let file = Settings::load(path)?;
                Ok(self.merged(file))
            }
            None => Ok(self),
        }
    }

    pub fn load(path: &Path) -> Result<Settings, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let bad = |e: String| CliError::config(format!("{}: {e}", path.display()));
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            // a run manifest keeps its settings under `settings`
            if let Some(inner) = value.get_mut("settings") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))
        }
    }

    fn merged(self, file: Settings) -> Settings {
        let a = self;
        let b = file;
        merge_fields!(a, b;
            input, column, channel, fs, duration, bpm, noises, noise_file, snr_in, pipeline,
            algo, taps, mu, step_mode, eps, lambda, delta, ref_shift, ref_fir, sdaf_order,
            skip_samples, sd_threshold, max_sift_iterations, max_imfs, boundary_mirror,
            seed, trials, jobs, outdir, stages, selection;
            synthetic_ecg, plot)
    }

    pub fn outdir(&self) -> PathBuf {
        self.outdir.clone().unwrap_or_else(|| PathBuf::from("ecg-anc-out"))
    }

    pub fn filter(&self) -> FilterSpec {
        StageOverride {
            algo: self.algo,
            taps: self.taps,
            mu: self.mu,
            step_mode: self.step_mode,
            eps: self.eps,
            lambda: self.lambda,
            delta: self.delta,
        }
        .apply(None)
    }

    pub fn sift(&self) -> SiftConfig {
        let d = SiftConfig::default();
        SiftConfig {
            sd_threshold: self.sd_threshold.unwrap_or(d.sd_threshold),
            max_sift_iterations: self.max_sift_iterations.unwrap_or(d.max_sift_iterations),
            max_imfs: self.max_imfs.unwrap_or(d.max_imfs),
            boundary_mirror: self.boundary_mirror.unwrap_or(d.boundary_mirror),
        }
    }

    pub fn reference(&self) -> ReferenceSpec {
        let d = ReferenceSpec::default();
        ReferenceSpec {
            shift: self.ref_shift.unwrap_or(d.shift),
            fir_taps: self.ref_fir.clone().unwrap_or(d.fir_taps),
        }
    }

    pub fn pipeline_config(&self, kind: PipelineKind) -> Result<PipelineConfig, CliError> {
        let base = self.filter();
        let mut config = PipelineConfig::new(kind, base);
        for (stage, o) in self.stages.iter().flatten() {
            if config.stages.contains_key(stage) {
                config.stages.insert(*stage, o.apply(Some(base)));
            }
        }
        config.sift = self.sift();
        if let Some(sel) = &self.selection {
            config.selection = sel.clone();
        }
        if let Some(order) = &self.sdaf_order {
            config.sdaf_order = order
                .as_slice()
                .try_into()
                .map_err(|_| CliError::config("--sdaf-order needs exactly four kinds"))?;
        }
        config.skip_samples = self.skip_samples.unwrap_or(0);
        config.validate()?;
        Ok(config)
    }
}

impl StageOverride {
    /// Overrides on top of `base`, or on the algorithm defaults when `base` is `None`.
    /// A changed algorithm starts from that algorithm's defaults.
    fn apply(&self, base: Option<FilterSpec>) -> FilterSpec {
        let mut spec = match (base, self.algo) {
            (Some(b), None) => b,
            (Some(b), Some(a)) if a == b.algo => b,
            (_, a) => FilterSpec::for_algorithm(a.unwrap_or(Algorithm::Lms)),
        };
        spec.taps = self.taps.unwrap_or(spec.taps);
        spec.mu = self.mu.unwrap_or(spec.mu);
        spec.step_mode = self.step_mode.unwrap_or(spec.step_mode);
        spec.eps = self.eps.unwrap_or(spec.eps);
        spec.lambda = self.lambda.unwrap_or(spec.lambda);
        spec.delta = self.delta.unwrap_or(spec.delta);
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_config() {
        let file: Settings = toml::from_str(
            "taps = 8\nmu = 0.2\nnoises = [\"bw\", \"pli\"]\nsnr-in = [5, 10]\nplot = true\n\
             [stages.pli]\ntaps = 2\nstep-mode = \"ref-power\"\n[selection]\nbw = \"4..8\"\n",
        )
        .unwrap();
        let flags = Settings {
            taps: Some(16),
            ..Default::default()
        };
        let s = flags.merged(file);
        assert_eq!(s.taps, Some(16));
        assert_eq!(s.mu, Some(0.2));
        assert_eq!(s.noises, Some(vec![NoiseKind::Bw, NoiseKind::Pli]));
        assert!(s.plot);
        let cfg = s.pipeline_config(PipelineKind::BwPli).unwrap();
        assert_eq!(cfg.stages[&Stage::Bw].taps, 16);
        assert_eq!(cfg.stages[&Stage::Pli].taps, 2);
        assert_eq!(cfg.stages[&Stage::Pli].mu, 0.2);
        assert_eq!(cfg.stages[&Stage::Pli].step_mode, StepMode::ReferencePower);
        assert_eq!(cfg.selection.bw, "4..8".parse().unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Settings>("tapz = 3").is_err());
    }

    #[test]
    fn algorithm_defaults_follow_the_algorithm() {
        let s = Settings {
            algo: Some(Algorithm::Nlms),
            ..Default::default()
        };
        assert_eq!(s.filter(), FilterSpec::nlms());
        assert_eq!(Settings::default().filter(), FilterSpec::lms());
    }
}
