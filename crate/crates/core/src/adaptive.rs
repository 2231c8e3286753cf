//! Transversal LMS / NLMS / RLS filters in the noise-cancellation arrangement.
//!
//! The reference noise drives an `L`-tap filter whose output estimates the
//! noise contained in the primary (noisy) input. The error `desired − output`
//! is the denoised signal:
//!
//! ```text
//! reference ──► [ w ] ──► estimated noise ─┐
//!                                          ▼
//! noisy ───────────────────────────────► (−) ──► denoised
//! ```
//!
//! The regressor at sample `n` is `[ref(n), ref(n−1), .., ref(n−L+1)]` with
//! zeros before the start of the record, so outputs have the input length.
//! Weights start at zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{power, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lms,
    Nlms,
    Rls,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Lms => "lms",
            Algorithm::Nlms => "nlms",
            Algorithm::Rls => "rls",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lms" => Ok(Algorithm::Lms),
            "nlms" => Ok(Algorithm::Nlms),
            "rls" => Ok(Algorithm::Rls),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// How the LMS step size `mu` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// `mu` is used as given.
    #[default]
    Fixed,
    /// The LMS step is `mu / (L · P_ref)`, with `P_ref` the mean power of the
    /// whole reference record. Makes `mu` independent of signal scale.
    /// NLMS and RLS ignore this.
    #[serde(rename = "ref-power", alias = "reference-power")]
    ReferencePower,
}

impl FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(StepMode::Fixed),
            "ref-power" | "reference-power" => Ok(StepMode::ReferencePower),
            other => Err(Error::InvalidConfig(format!("unknown step mode `{other}`"))),
        }
    }
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepMode::Fixed => "fixed",
            StepMode::ReferencePower => "ref-power",
        })
    }
}

/// Algorithm choice and parameters.
///
/// `mu == 0` freezes LMS/NLMS weights at zero, which makes the filter an
/// exact pass-through (`denoised == noisy`). RLS has no step size; use
/// [`FilterSpec::frozen`] to get an identity filter of any algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub algo: Algorithm,
    pub taps: usize,
    pub mu: f64,
    pub eps: f64,
    pub lambda: f64,
    pub delta: f64,
    #[serde(default)]
    pub step_mode: StepMode,
    /// Skip adaptation entirely (weights stay zero).
    #[serde(default)]
    pub frozen: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::lms()
    }
}

impl FilterSpec {
    pub const DEFAULT_TAPS: usize = 32;
    pub const DEFAULT_LMS_MU: f64 = 0.01;
    pub const DEFAULT_NLMS_MU: f64 = 0.5;

    pub fn lms() -> Self {
        FilterSpec {
            algo: Algorithm::Lms,
            taps: Self::DEFAULT_TAPS,
            mu: Self::DEFAULT_LMS_MU,
            eps: 1e-6,
            lambda: 0.999,
            delta: 100.0,
            step_mode: StepMode::Fixed,
            frozen: false,
        }
    }

    pub fn nlms() -> Self {
        FilterSpec {
            algo: Algorithm::Nlms,
            mu: Self::DEFAULT_NLMS_MU,
            ..Self::lms()
        }
    }

    pub fn rls() -> Self {
        FilterSpec {
            algo: Algorithm::Rls,
            ..Self::lms()
        }
    }

    /// Defaults for `algo`.
    pub fn for_algorithm(algo: Algorithm) -> Self {
        match algo {
            Algorithm::Lms => Self::lms(),
            Algorithm::Nlms => Self::nlms(),
            Algorithm::Rls => Self::rls(),
        }
    }

    pub fn with_taps(mut self, taps: usize) -> Self {
        self.taps = taps;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_step_mode(mut self, mode: StepMode) -> Self {
        self.step_mode = mode;
        self
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    /// Checks parameter ranges. `mu == 0` is accepted as the frozen case.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.taps == 0 {
            return bad("taps must be >= 1");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu must be a finite value >= 0");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be > 0");
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must lie in (0, 1]");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be > 0");
        }
        Ok(())
    }
}

/// Output of one noise-cancellation run.
#[derive(Debug, Clone, PartialEq)]
pub struct AncResult {
    /// `noisy − estimated_noise`.
    pub denoised: TimeSeries,
    /// Filter output.
    pub estimated_noise: TimeSeries,
    pub final_weights: Vec<f64>,
    /// Squared a-priori error per sample.
    pub squared_error: Vec<f64>,
}

fn check_inputs(reference: &TimeSeries, desired: &TimeSeries, spec: &FilterSpec, algo: Algorithm) -> Result<()> {
    reference.check_compatible(desired)?;
    spec.validate()?;
    if spec.algo != algo {
        return Err(Error::InvalidConfig(format!(
            "spec is for {}, called as {algo}",
            spec.algo
        )));
    }
    Ok(())
}

/// Shared sample loop; `update` adjusts the weights given the regressor and error.
fn run_filter(
    reference: &TimeSeries,
    desired: &TimeSeries,
    taps: usize,
    mut update: impl FnMut(&mut [f64], &[f64], f64),
) -> Result<AncResult> {
    let r = reference.samples();
    let d = desired.samples();
    let mut w = vec![0.0; taps];
    let mut u = vec![0.0; taps];
    let mut out = Vec::with_capacity(d.len());
    let mut den = Vec::with_capacity(d.len());
    let mut sq = Vec::with_capacity(d.len());
    for n in 0..d.len() {
        u.copy_within(0..taps - 1, 1);
        u[0] = r[n];
        let y: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
        let e = d[n] - y;
        if !e.is_finite() {
            return Err(Error::Diverged { index: n, stage: None });
        }
        update(&mut w, &u, e);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { index: n, stage: None });
        }
        out.push(y);
        den.push(e);
        sq.push(e * e);
    }
    Ok(AncResult {
        denoised: TimeSeries::from_trusted(den, desired.fs()),
        estimated_noise: TimeSeries::from_trusted(out, desired.fs()),
        final_weights: w,
        squared_error: sq,
    })
}

fn effective_lms_mu(reference: &TimeSeries, spec: &FilterSpec) -> f64 {
    match spec.step_mode {
        StepMode::Fixed => spec.mu,
        StepMode::ReferencePower => {
            let p = power(reference);
            if p > 0.0 {
                spec.mu / (spec.taps as f64 * p)
            } else {
                0.0
            }
        }
    }
}

/// Least-mean-squares: `w ← w + mu · e · u`.
pub fn run_lms(reference: &TimeSeries, desired: &TimeSeries, spec: &FilterSpec) -> Result<AncResult> {
    check_inputs(reference, desired, spec, Algorithm::Lms)?;
    let mu = if spec.frozen { 0.0 } else { effective_lms_mu(reference, spec) };
    run_filter(reference, desired, spec.taps, |w, u, e| {
        if mu == 0.0 {
            return;
        }
        let g = mu * e;
        for (wi, ui) in w.iter_mut().zip(u) {
            *wi += g * ui;
        }
    })
}

/// Normalized LMS: `w ← w + mu / (eps + uᵀu) · e · u`.
pub fn run_nlms(reference: &TimeSeries, desired: &TimeSeries, spec: &FilterSpec) -> Result<AncResult> {
    check_inputs(reference, desired, spec, Algorithm::Nlms)?;
    let mu = if spec.frozen { 0.0 } else { spec.mu };
    let eps = spec.eps;
    run_filter(reference, desired, spec.taps, |w, u, e| {
        if mu == 0.0 {
            return;
        }
        let norm: f64 = u.iter().map(|v| v * v).sum();
        let g = mu * e / (eps + norm);
        for (wi, ui) in w.iter_mut().zip(u) {
            *wi += g * ui;
        }
    })
}

/// Exponentially weighted recursive least squares with `P(0) = delta · I`.
pub fn run_rls(reference: &TimeSeries, desired: &TimeSeries, spec: &FilterSpec) -> Result<AncResult> {
    check_inputs(reference, desired, spec, Algorithm::Rls)?;
    let l = spec.taps;
    let lambda = spec.lambda;
    let frozen = spec.frozen;
    // row-major L x L inverse correlation estimate
    let mut p = vec![0.0; l * l];
    for i in 0..l {
        p[i * l + i] = spec.delta;
    }
    let mut pu = vec![0.0; l];
    let mut k = vec![0.0; l];
    run_filter(reference, desired, l, |w, u, e| {
        if frozen {
            return;
        }
        for i in 0..l {
            pu[i] = p[i * l..(i + 1) * l].iter().zip(u).map(|(a, b)| a * b).sum();
        }
        let denom = lambda + u.iter().zip(&pu).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..l {
            k[i] = pu[i] / denom;
            w[i] += k[i] * e;
        }
        // P ← (P − k (uᵀP)) / lambda; P is symmetric so uᵀP = (P u)ᵀ
        for i in 0..l {
            for j in 0..l {
                p[i * l + j] = (p[i * l + j] - k[i] * pu[j]) / lambda;
            }
        }
    })
}

/// Cancels the noise in `noisy` that is correlated with `reference`.
pub fn anc_denoise(noisy: &TimeSeries, reference: &TimeSeries, spec: &FilterSpec) -> Result<AncResult> {
    match spec.algo {
        Algorithm::Lms => run_lms(reference, noisy, spec),
        Algorithm::Nlms => run_nlms(reference, noisy, spec),
        Algorithm::Rls => run_rls(reference, noisy, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 360.0).unwrap()
    }

    fn lcg_noise(n: usize, seed: u64) -> Vec<f64> {
        // uniform on [-sqrt(3), sqrt(3)]: unit power
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * 3f64.sqrt()
            })
            .collect()
    }

    #[test]
    fn zero_reference_is_identity() {
        let d = ts(vec![1.0, -2.0, 3.0, 0.5]);
        let r = ts(vec![0.0; 4]);
        for spec in [FilterSpec::lms(), FilterSpec::nlms(), FilterSpec::rls()] {
            let out = anc_denoise(&d, &r, &spec).unwrap();
            assert_eq!(out.denoised, d);
            assert!(out.final_weights.iter().all(|w| *w == 0.0));
        }
    }

    #[test]
    fn mu_zero_is_identity() {
        let r = ts(lcg_noise(500, 1));
        let d = ts(lcg_noise(500, 2));
        for spec in [FilterSpec::lms(), FilterSpec::nlms()] {
            let out = anc_denoise(&d, &r, &spec.with_mu(0.0)).unwrap();
            assert_eq!(out.denoised, d);
        }
        let out = anc_denoise(&d, &r, &FilterSpec::rls().frozen()).unwrap();
        assert_eq!(out.denoised, d);
    }

    #[test]
    fn outputs_split_exactly() {
        let r = ts(lcg_noise(400, 3));
        let d = ts(lcg_noise(400, 4).iter().zip(r.samples()).map(|(a, b)| a + 0.7 * b).collect());
        for spec in [FilterSpec::lms(), FilterSpec::nlms(), FilterSpec::rls()] {
            let out = anc_denoise(&d, &r, &spec.with_taps(4)).unwrap();
            for i in 0..400 {
                let (y, e, x) = (out.estimated_noise.samples()[i], out.denoised.samples()[i], d.samples()[i]);
                assert_eq!(x - y, e);
                assert!((e + y - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(y.abs()));
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let r = ts(lcg_noise(2000, 5).iter().map(|v| v * 100.0).collect());
        let d = r.clone();
        let err = run_lms(&r, &d, &FilterSpec::lms().with_mu(1.0)).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn algorithm_mismatch_and_bad_specs() {
        let r = ts(vec![1.0; 8]);
        assert!(run_nlms(&r, &r, &FilterSpec::lms()).is_err());
        assert!(run_lms(&r, &r, &FilterSpec::lms().with_taps(0)).is_err());
        let mut s = FilterSpec::rls();
        s.lambda = 1.5;
        assert!(run_rls(&r, &r, &s).is_err());
        assert!(run_lms(&r, &ts(vec![1.0; 7]), &FilterSpec::lms()).is_err());
    }

    #[test]
    fn reference_power_mode_is_scale_free() {
        let r = ts(lcg_noise(1000, 6));
        let d = ts(r.samples().iter().map(|v| 0.5 * v).collect());
        let spec = FilterSpec::lms().with_taps(1).with_mu(0.05).with_step_mode(StepMode::ReferencePower);
        let a = run_lms(&r, &d, &spec).unwrap();
        let b = run_lms(&r.scale(1e-3).unwrap(), &d.scale(1e-3).unwrap(), &spec).unwrap();
        assert!((a.final_weights[0] - b.final_weights[0]).abs() < 1e-9);
    }

    #[test]
    fn parses_names() {
        assert_eq!("NLMS".parse::<Algorithm>().unwrap(), Algorithm::Nlms);
        assert!("kalman".parse::<Algorithm>().is_err());
        assert_eq!("ref-power".parse::<StepMode>().unwrap(), StepMode::ReferencePower);
    }
}
