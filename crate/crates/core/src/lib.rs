//! ECG denoising with empirical mode decomposition and adaptive noise cancellation.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`]: the [`TimeSeries`] type and the SNR / RMSE / SNR-improvement metrics.
//! * [`emd`]: sifting-based empirical mode decomposition.
//! * [`adaptive`]: LMS, NLMS and RLS filters arranged for noise cancellation.
//! * [`noise`]: synthetic noise sources, SNR-controlled mixing and reference derivation.
//! * [`pipelines`]: the BW+PLI architecture, SDAF/PDAF/SEAF/PEAF and the IMF-selection study.
//! * [`dataio`]: WFDB format-212 and CSV input, CSV output.
//!
//! ```
//! use ecg_anc::noise::{mix, synthetic_ecg, NoiseSpec, PliParams, ReferenceSpec};
//! use ecg_anc::pipelines::{run_pdaf, PipelineConfig, PipelineKind};
//! use ecg_anc::adaptive::FilterSpec;
//!
//! let clean = synthetic_ecg(360.0, 1800, 72.0)?;
//! let record = mix(&clean, &[NoiseSpec::pli(PliParams::default())], 10.0, &ReferenceSpec::default())?;
//! let config = PipelineConfig::new(PipelineKind::Pdaf, FilterSpec::lms().with_taps(2).with_mu(0.05));
//! let run = run_pdaf(&record, &config)?;
//! assert!(run.result.snr_imp_db > 0.0);
//! # Ok::<(), ecg_anc::Error>(())
//! ```

pub mod adaptive;
pub mod dataio;
pub mod emd;
mod error;
pub mod noise;
pub mod pipelines;
pub mod signal;

pub use error::{Error, Result};
pub use signal::TimeSeries;

// The guide under `book/` is compiled as doctests so its snippets stay in
// sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals-and-metrics.md")]
    mod signals_and_metrics {}
    #[doc = include_str!("../../../book/src/emd.md")]
    mod emd {}
    #[doc = include_str!("../../../book/src/adaptive-filters.md")]
    mod adaptive_filters {}
    #[doc = include_str!("../../../book/src/noise-lab.md")]
    mod noise_lab {}
    #[doc = include_str!("../../../book/src/pipelines.md")]
    mod pipelines {}
    #[doc = include_str!("../../../book/src/data-formats.md")]
    mod data_formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
