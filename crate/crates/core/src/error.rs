use std::path::PathBuf;

use crate::noise::NoiseKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("sampling rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },

    /// The test signal equals the reference exactly, so the error energy is zero.
    #[error("zero error energy (perfect reconstruction)")]
    ZeroErrorEnergy,

    #[error("zero signal energy")]
    ZeroSignalEnergy,

    #[error("zero noise energy")]
    ZeroNoiseEnergy,

    #[error("frequency {freq} Hz outside (0, {nyquist}) Hz")]
    FrequencyOutOfRange { freq: f64, nyquist: f64 },

    #[error("too few extrema for envelope interpolation ({maxima} maxima, {minima} minima)")]
    TooFewExtrema { maxima: usize, minima: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A non-finite weight or output appeared while adapting.
    #[error("adaptive filter diverged at sample {index}{}", stage.map(|s| format!(" in stage `{s}`")).unwrap_or_default())]
    Diverged {
        index: usize,
        stage: Option<&'static str>,
    },

    #[error("missing reference for {0}")]
    MissingReference(NoiseKind),

    #[error("noise list is empty")]
    EmptyNoiseList,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("malformed header {path}: {message}")]
    MalformedHeader { path: PathBuf, message: String },

    #[error("truncated signal file {path}: expected {expected} bytes, found {found}")]
    TruncatedSignal {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unsupported WFDB signal format {0} (only 212 is handled)")]
    UnsupportedFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a pipeline stage name to a divergence error; other errors pass through.
    pub fn in_stage(self, name: &'static str) -> Self {
        match self {
            Error::Diverged { index, stage: None } => Error::Diverged {
                index,
                stage: Some(name),
            },
            other => other,
        }
    }
}
