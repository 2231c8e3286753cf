//! Uniformly sampled signals and the evaluation metrics used throughout the crate.
//!
//! Every operation here is a pure function over immutable [`TimeSeries`]
//! values. The three figures of merit are
//!
//! * `SNR = 10 log10( Σ clean² / Σ (test − clean)² )`
//! * `RMSE = sqrt( Σ (test − clean)² / N )`
//! * `SNR_imp = 10 log10( Σ (noisy − clean)² / Σ (denoised − clean)² )`
//!
//! Zero denominators are reported as errors instead of infinities so result
//! tables never contain non-finite values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty, uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    fs: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidSeries(format!("sampling rate must be > 0, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidSeries("series must contain at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(TimeSeries { samples, fs })
    }

    pub fn zeros(len: usize, fs: f64) -> Result<Self> {
        Self::new(vec![0.0; len], fs)
    }

    /// Builds a series sample-by-sample from `f(k)`.
    pub fn from_fn(len: usize, fs: f64, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((0..len).map(f).collect(), fs)
    }

    /// Wraps samples already known to be finite and non-empty.
    pub(crate) fn from_trusted(samples: Vec<f64>, fs: f64) -> Self {
        debug_assert!(!samples.is_empty() && samples.iter().all(|v| v.is_finite()));
        TimeSeries { samples, fs }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for the `len`/`is_empty` convention.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Checks that `other` has the same length and sampling rate.
    pub fn check_compatible(&self, other: &TimeSeries) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if self.fs != other.fs {
            return Err(Error::SampleRateMismatch {
                left: self.fs,
                right: other.fs,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &TimeSeries) -> Result<TimeSeries> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TimeSeries) -> Result<TimeSeries> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, gain: f64) -> Result<TimeSeries> {
        TimeSeries::new(self.samples.iter().map(|v| v * gain).collect(), self.fs)
    }

    fn zip_with(&self, other: &TimeSeries, f: impl Fn(f64, f64) -> f64) -> Result<TimeSeries> {
        self.check_compatible(other)?;
        TimeSeries::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            self.fs,
        )
    }

    /// Sample-wise sum of several compatible series, accumulated left to right.
    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a TimeSeries>) -> Result<Option<TimeSeries>> {
        let mut acc: Option<TimeSeries> = None;
        for part in parts {
            acc = Some(match acc {
                None => part.clone(),
                Some(a) => a.add(part)?,
            });
        }
        Ok(acc)
    }

    /// Copy of samples `start..` as a new series; `start` must leave at least one sample.
    pub fn tail(&self, start: usize) -> Result<TimeSeries> {
        if start >= self.len() {
            return Err(Error::InvalidSeries(format!(
                "cannot skip {start} of {} samples",
                self.len()
            )));
        }
        Ok(TimeSeries::from_trusted(self.samples[start..].to_vec(), self.fs))
    }
}

/// SNR, RMSE and SNR improvement of one denoising run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub snr_db: f64,
    pub rmse: f64,
    pub snr_imp_db: f64,
}

impl MetricReport {
    /// Evaluates `denoised` against `clean`, ignoring the first `skip_samples`.
    pub fn evaluate(
        clean: &TimeSeries,
        noisy: &TimeSeries,
        denoised: &TimeSeries,
        skip_samples: usize,
    ) -> Result<Self> {
        let (c, n, d) = if skip_samples == 0 {
            (clean.clone(), noisy.clone(), denoised.clone())
        } else {
            (
                clean.tail(skip_samples)?,
                noisy.tail(skip_samples)?,
                denoised.tail(skip_samples)?,
            )
        };
        Ok(MetricReport {
            snr_db: snr(&c, &d)?,
            rmse: rmse(&c, &d)?,
            snr_imp_db: snr_improvement(&c, &n, &d)?,
        })
    }
}

/// Mean power `Σ x² / N`.
pub fn power(x: &TimeSeries) -> f64 {
    energy(x.samples()) / x.len() as f64
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn error_energy(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Signal-to-noise ratio of `test` against `clean`, in dB.
pub fn snr(clean: &TimeSeries, test: &TimeSeries) -> Result<f64> {
    clean.check_compatible(test)?;
    let signal = energy(clean.samples());
    if signal == 0.0 {
        return Err(Error::ZeroSignalEnergy);
    }
    let err = error_energy(test.samples(), clean.samples());
    if err == 0.0 {
        return Err(Error::ZeroErrorEnergy);
    }
    Ok(10.0 * (signal / err).log10())
}

pub fn rmse(clean: &TimeSeries, test: &TimeSeries) -> Result<f64> {
    if clean.len() != test.len() {
        return Err(Error::LengthMismatch {
            left: clean.len(),
            right: test.len(),
        });
    }
    Ok((error_energy(test.samples(), clean.samples()) / clean.len() as f64).sqrt())
}

/// Output SNR minus input SNR, computed directly as a ratio of error energies.
pub fn snr_improvement(clean: &TimeSeries, noisy: &TimeSeries, denoised: &TimeSeries) -> Result<f64> {
    clean.check_compatible(noisy)?;
    clean.check_compatible(denoised)?;
    let before = error_energy(noisy.samples(), clean.samples());
    if before == 0.0 {
        return Err(Error::ZeroNoiseEnergy);
    }
    let after = error_energy(denoised.samples(), clean.samples());
    if after == 0.0 {
        return Err(Error::ZeroErrorEnergy);
    }
    Ok(10.0 * (before / after).log10())
}

/// Magnitude of the correlation of `x` with `exp(-j 2π f n / fs)`, divided by N.
///
/// A unit sinusoid at an exact bin frequency yields 0.5.
pub fn bin_magnitude(x: &TimeSeries, freq: f64) -> Result<f64> {
    let nyquist = x.fs() / 2.0;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(Error::FrequencyOutOfRange { freq, nyquist });
    }
    let w = 2.0 * PI * freq / x.fs();
    let (re, im) = x
        .samples()
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (n, &v)| {
            let phase = w * n as f64;
            (re + v * phase.cos(), im - v * phase.sin())
        });
    Ok(re.hypot(im) / x.len() as f64)
}

/// Pearson correlation of two equal-length slices; 0 when either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "correlation of unequal lengths");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}
