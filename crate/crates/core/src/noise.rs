//! Noise laboratory: synthetic sources, SNR-controlled mixing and reference derivation.
//!
//! A [`NoisyRecord`] bundles the clean ECG, the corrupted signal, the noise
//! that was added, and one *reference* per noise kind. References are what
//! the adaptive filters see: circularly shifted and FIR-filtered copies of
//! the added noise, correlated with it but not equal to it.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use biquad::{Biquad, Coefficients, DirectForm2Transposed, ToHertz, Type, Q_BUTTERWORTH_F64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{energy, power, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Baseline wander.
    Bw,
    /// Power line interference.
    Pli,
    /// Electrode motion artifact.
    Em,
    /// Muscle artifact.
    Ma,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::Bw, NoiseKind::Pli, NoiseKind::Em, NoiseKind::Ma];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Bw => "bw",
            NoiseKind::Pli => "pli",
            NoiseKind::Em => "em",
            NoiseKind::Ma => "ma",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_ascii_uppercase())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bw" => Ok(NoiseKind::Bw),
            "pli" => Ok(NoiseKind::Pli),
            "em" => Ok(NoiseKind::Em),
            "ma" => Ok(NoiseKind::Ma),
            other => Err(Error::InvalidConfig(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PliParams {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl Default for PliParams {
    fn default() -> Self {
        PliParams {
            freq: 60.0,
            amplitude: 1.0,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    /// Recorded (or synthesized) noise; at least as long as the target.
    Record(TimeSeries),
    Sinusoid(PliParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub source: NoiseSource,
}

impl NoiseSpec {
    pub fn record(kind: NoiseKind, source: TimeSeries) -> Self {
        NoiseSpec {
            kind,
            source: NoiseSource::Record(source),
        }
    }

    pub fn pli(params: PliParams) -> Self {
        NoiseSpec {
            kind: NoiseKind::Pli,
            source: NoiseSource::Sinusoid(params),
        }
    }

    /// Seeded synthetic stand-in for `kind` (PLI is the default 60 Hz sinusoid).
    pub fn synthetic(kind: NoiseKind, fs: f64, n: usize, seed: u64) -> Result<Self> {
        Ok(match kind {
            NoiseKind::Pli => Self::pli(PliParams::default()),
            NoiseKind::Bw => Self::record(kind, synthetic_bw(fs, n, seed)?),
            NoiseKind::Em => Self::record(kind, synthetic_em(fs, n, seed)?),
            NoiseKind::Ma => Self::record(kind, synthetic_ma(fs, n, seed)?),
        })
    }

    /// The first `n` samples of this noise at rate `fs`.
    pub fn realize(&self, fs: f64, n: usize) -> Result<TimeSeries> {
        match &self.source {
            NoiseSource::Sinusoid(p) => gen_pli(fs, n, p.freq, p.amplitude, p.phase),
            NoiseSource::Record(src) => {
                if src.fs() != fs {
                    return Err(Error::SampleRateMismatch {
                        left: fs,
                        right: src.fs(),
                    });
                }
                if src.len() < n {
                    return Err(Error::InvalidConfig(format!(
                        "{} source has {} samples, need {n}",
                        self.kind,
                        src.len()
                    )));
                }
                TimeSeries::new(src.samples()[..n].to_vec(), fs)
            }
        }
    }
}

/// How a reference is derived from its noise: circular shift, then FIR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub shift: usize,
    pub fir_taps: Vec<f64>,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            shift: 200,
            fir_taps: vec![0.1, 0.2, 0.4, 0.2, 0.1],
        }
    }
}

impl ReferenceSpec {
    pub fn identity() -> Self {
        ReferenceSpec {
            shift: 0,
            fir_taps: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fir_taps.is_empty() || self.fir_taps.iter().sum::<f64>() == 0.0 {
            return Err(Error::InvalidConfig("reference FIR must be nonempty with nonzero sum".into()));
        }
        if self.fir_taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("reference FIR taps must be finite".into()));
        }
        Ok(())
    }
}

/// Reference specs per noise kind, falling back to `default`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferencePlan {
    pub default: ReferenceSpec,
    pub per_kind: BTreeMap<NoiseKind, ReferenceSpec>,
}

impl ReferencePlan {
    pub fn spec_for(&self, kind: NoiseKind) -> &ReferenceSpec {
        self.per_kind.get(&kind).unwrap_or(&self.default)
    }
}

impl From<ReferenceSpec> for ReferencePlan {
    fn from(default: ReferenceSpec) -> Self {
        ReferencePlan {
            default,
            per_kind: BTreeMap::new(),
        }
    }
}

/// Clean signal, corrupted signal and per-kind references.
///
/// `noisy == clean + added_noise` and `noisy − clean == added_noise`, both
/// sample-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyRecord {
    pub id: String,
    pub seed: u64,
    pub clean: TimeSeries,
    pub noisy: TimeSeries,
    pub added_noise: TimeSeries,
    /// Scaled contribution of each kind to `added_noise`.
    pub components: BTreeMap<NoiseKind, TimeSeries>,
    pub references: BTreeMap<NoiseKind, TimeSeries>,
    pub target_snr_db: f64,
}

impl NoisyRecord {
    pub fn reference(&self, kind: NoiseKind) -> Result<&TimeSeries> {
        self.references.get(&kind).ok_or(Error::MissingReference(kind))
    }

    /// Sum of all references, for treating every noise as one.
    pub fn combined_reference(&self) -> Result<TimeSeries> {
        TimeSeries::sum(self.references.values())?
            .ok_or_else(|| Error::InvalidConfig("record has no references".into()))
    }

    /// Adds or replaces a reference, e.g. an uncorrelated one for an idle stage.
    pub fn with_reference(mut self, kind: NoiseKind, reference: TimeSeries) -> Result<Self> {
        self.clean.check_compatible(&reference)?;
        self.references.insert(kind, reference);
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>, seed: u64) -> Self {
        self.id = id.into();
        self.seed = seed;
        self
    }
}

/// `amplitude · sin(2π · freq · k / fs + phase)` for `k = 0..n`.
pub fn gen_pli(fs: f64, n: usize, freq: f64, amplitude: f64, phase: f64) -> Result<TimeSeries> {
    if !(freq > 0.0 && freq < fs / 2.0) {
        return Err(Error::FrequencyOutOfRange {
            freq,
            nyquist: fs / 2.0,
        });
    }
    // fmod is exact, so the phase argument stays small on long records
    TimeSeries::from_fn(n, fs, |k| {
        let cycle = (freq * k as f64) % fs / fs;
        amplitude * (2.0 * PI * cycle + phase).sin()
    })
}

/// Scales `noise` so that `snr(signal, signal + gain · noise) == target_snr_db`.
pub fn scale_to_snr(signal: &TimeSeries, noise: &TimeSeries, target_snr_db: f64) -> Result<(TimeSeries, f64)> {
    signal.check_compatible(noise)?;
    if !target_snr_db.is_finite() {
        return Err(Error::InvalidConfig("target SNR must be finite".into()));
    }
    let es = energy(signal.samples());
    if es == 0.0 {
        return Err(Error::ZeroSignalEnergy);
    }
    let en = energy(noise.samples());
    if en == 0.0 {
        return Err(Error::ZeroNoiseEnergy);
    }
    let gain = (es / (en * 10f64.powf(target_snr_db / 10.0))).sqrt();
    Ok((noise.scale(gain)?, gain))
}

/// Circularly delays `noise` by `shift` samples (modulo its length), then applies the causal FIR
/// `y[i] = Σ_k fir[k] · x[i − k]` with zeros before the first sample.
pub fn derive_reference(noise: &TimeSeries, spec: &ReferenceSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let n = noise.len();
    let mut shifted = noise.samples().to_vec();
    shifted.rotate_right(spec.shift % n);
    let out = (0..n)
        .map(|i| {
            spec.fir_taps
                .iter()
                .enumerate()
                .take_while(|(k, _)| *k <= i)
                .map(|(k, h)| h * shifted[i - k])
                .sum()
        })
        .collect();
    TimeSeries::new(out, noise.fs())
}

/// Corrupts `clean` with the listed noises at `target_snr_db`.
///
/// Each noise is normalized to unit power, the unit-power noises are summed,
/// and the sum is scaled to hit the target SNR. Every reference is derived
/// from its own unscaled noise and then multiplied by that noise's effective
/// gain.
pub fn mix(clean: &TimeSeries, noises: &[NoiseSpec], target_snr_db: f64, ref_spec: &ReferenceSpec) -> Result<NoisyRecord> {
    mix_with_plan(clean, noises, target_snr_db, &ReferencePlan::from(ref_spec.clone()))
}

pub fn mix_with_plan(
    clean: &TimeSeries,
    noises: &[NoiseSpec],
    target_snr_db: f64,
    plan: &ReferencePlan,
) -> Result<NoisyRecord> {
    if noises.is_empty() {
        return Err(Error::EmptyNoiseList);
    }
    let (n, fs) = (clean.len(), clean.fs());
    let mut raw = Vec::with_capacity(noises.len());
    for spec in noises {
        if raw.iter().any(|(k, _, _): &(NoiseKind, TimeSeries, f64)| *k == spec.kind) {
            return Err(Error::InvalidConfig(format!("noise {} listed twice", spec.kind)));
        }
        let series = spec.realize(fs, n)?;
        let p = power(&series);
        if p == 0.0 {
            return Err(Error::ZeroNoiseEnergy);
        }
        raw.push((spec.kind, series, p));
    }

    let units: Vec<TimeSeries> = raw
        .iter()
        .map(|(_, s, p)| s.scale(1.0 / p.sqrt()))
        .collect::<Result<_>>()?;
    let composite = TimeSeries::sum(&units)?.expect("nonempty");
    let (scaled, gain) = scale_to_snr(clean, &composite, target_snr_db)?;

    let noisy = clean.add(&scaled)?;
    let added_noise = noisy.sub(clean)?;

    let mut components = BTreeMap::new();
    let mut references = BTreeMap::new();
    for ((kind, series, p), unit) in raw.iter().zip(&units) {
        let effective = gain / p.sqrt();
        components.insert(*kind, unit.scale(gain)?);
        let reference = derive_reference(series, plan.spec_for(*kind))?.scale(effective)?;
        references.insert(*kind, reference);
    }

    Ok(NoisyRecord {
        id: String::new(),
        seed: 0,
        clean: clean.clone(),
        noisy,
        added_noise,
        components,
        references,
        target_snr_db,
    })
}

fn butterworth(kind: Type<f64>, fs: f64, cutoff: f64) -> DirectForm2Transposed<f64> {
    let coeffs = Coefficients::<f64>::from_params(kind, fs.hz(), cutoff.hz(), Q_BUTTERWORTH_F64)
        .expect("cutoff below Nyquist");
    DirectForm2Transposed::<f64>::new(coeffs)
}

/// Runs `x` through cascaded second-order Butterworth sections.
fn filter_cascade(x: &mut [f64], sections: &mut [DirectForm2Transposed<f64>]) {
    for v in x.iter_mut() {
        for s in sections.iter_mut() {
            *v = s.run(*v);
        }
    }
}

/// Samples discarded at the start of synthetic noise so filter transients die out.
fn warmup(fs: f64) -> usize {
    (2.0 * fs).ceil() as usize
}

fn check_rate(fs: f64, n: usize, max_freq: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSeries("requested zero samples".into()));
    }
    if !(fs > 2.0 * max_freq) {
        return Err(Error::FrequencyOutOfRange {
            freq: max_freq,
            nyquist: fs / 2.0,
        });
    }
    Ok(())
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Baseline wander stand-in: 0.3 Hz sinusoid plus a random walk low-passed at 1 Hz.
pub fn synthetic_bw(fs: f64, n: usize, seed: u64) -> Result<TimeSeries> {
    check_rate(fs, n, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0B0_0001);
    let skip = warmup(fs);
    let mut walk = Vec::with_capacity(n + skip);
    let mut acc = 0.0;
    for v in white(&mut rng, n + skip) {
        acc += v;
        walk.push(acc);
    }
    let mut lp = [
        butterworth(Type::LowPass, fs, 1.0),
        butterworth(Type::LowPass, fs, 1.0),
    ];
    filter_cascade(&mut walk, &mut lp);
    let walk = &walk[skip..];
    let mean = walk.iter().sum::<f64>() / n as f64;
    let rms = (walk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let phase = rng.random_range(0.0..2.0 * PI);
    TimeSeries::from_fn(n, fs, |k| {
        let drift = if rms > 0.0 { 0.5 * (walk[k] - mean) / rms } else { 0.0 };
        (2.0 * PI * 0.3 * k as f64 / fs + phase).sin() + drift
    })
}

/// Electrode motion stand-in: white noise high-passed at 30 Hz, gated into bursts.
pub fn synthetic_em(fs: f64, n: usize, seed: u64) -> Result<TimeSeries> {
    check_rate(fs, n, 30.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE1E1_0002);
    let skip = warmup(fs);
    let mut x = white(&mut rng, n + skip);
    let mut hp = [
        butterworth(Type::HighPass, fs, 30.0),
        butterworth(Type::HighPass, fs, 30.0),
    ];
    filter_cascade(&mut x, &mut hp);
    let x = &x[skip..];
    let mut gate = Vec::with_capacity(n);
    let mut on = rng.random_bool(0.5);
    while gate.len() < n {
        let (lo, hi, level) = if on { (0.1, 0.6, 1.0) } else { (0.2, 1.0, 0.15) };
        let len = (rng.random_range(lo..hi) * fs).ceil() as usize;
        gate.extend(std::iter::repeat_n(level, len.max(1)));
        on = !on;
    }
    TimeSeries::new(x.iter().zip(&gate).map(|(v, g)| v * g).collect(), fs)
}

/// Muscle artifact stand-in: white noise band-passed to 5 to 40 Hz.
pub fn synthetic_ma(fs: f64, n: usize, seed: u64) -> Result<TimeSeries> {
    check_rate(fs, n, 40.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3A3A_0003);
    let skip = warmup(fs);
    let mut x = white(&mut rng, n + skip);
    let mut bp = [
        butterworth(Type::HighPass, fs, 5.0),
        butterworth(Type::HighPass, fs, 5.0),
        butterworth(Type::LowPass, fs, 40.0),
        butterworth(Type::LowPass, fs, 40.0),
    ];
    filter_cascade(&mut x, &mut bp);
    TimeSeries::new(x[skip..].to_vec(), fs)
}

/// One Gaussian wave of the beat template: (offset from R in s, amplitude in mV, width in s).
const ECG_WAVES: [(f64, f64, f64); 5] = [
    (-0.20, 0.15, 0.025),
    (-0.025, -0.12, 0.010),
    (0.0, 1.00, 0.010),
    (0.025, -0.25, 0.010),
    (0.30, 0.30, 0.050),
];

/// Deterministic ECG stand-in: a P-QRS-T template of Gaussian bumps repeated at `bpm`.
pub fn synthetic_ecg(fs: f64, n: usize, bpm: f64) -> Result<TimeSeries> {
    if !(bpm > 0.0) {
        return Err(Error::InvalidConfig("heart rate must be > 0".into()));
    }
    if !(fs > 0.0) || n == 0 {
        return Err(Error::InvalidSeries("need fs > 0 and at least one sample".into()));
    }
    let period = 60.0 / bpm;
    let first_r = 0.3;
    TimeSeries::from_fn(n, fs, |k| {
        let t = k as f64 / fs;
        let beat = ((t - first_r) / period).round();
        (-1..=1)
            .map(|b| first_r + (beat + b as f64) * period)
            .flat_map(|r| {
                ECG_WAVES
                    .iter()
                    .map(move |(off, amp, width)| {
                        let d = t - r - off;
                        amp * (-0.5 * (d / width) * (d / width)).exp()
                    })
            })
            .sum()
    })
}
