//! Empirical mode decomposition.
//!
//! A signal is split into intrinsic mode functions (IMFs), ordered from the
//! highest to the lowest characteristic frequency, plus a slowly varying
//! residue. Each IMF is obtained by *sifting*: repeatedly subtracting the mean
//! of the upper and lower cubic-spline envelopes until the Cauchy-type
//! criterion `Σ(h_prev − h)² / Σ h_prev² < sd_threshold` holds and the
//! candidate has as many zero crossings as extrema (±1).
//!
//! The residue after each extraction is updated by subtraction, so
//! `Σ imfs + residue` reproduces the input up to floating-point rounding.

mod spline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{energy, TimeSeries};

/// Sifting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftConfig {
    pub sd_threshold: f64,
    pub max_sift_iterations: usize,
    pub max_imfs: usize,
    /// Number of extrema mirrored about each end of the signal.
    pub boundary_mirror: usize,
}

impl Default for SiftConfig {
    fn default() -> Self {
        SiftConfig {
            sd_threshold: 0.25,
            max_sift_iterations: 100,
            max_imfs: 10,
            boundary_mirror: 2,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_threshold > 0.0) {
            return Err(Error::InvalidConfig("sd_threshold must be > 0".into()));
        }
        if self.max_sift_iterations == 0 || self.max_imfs == 0 || self.boundary_mirror == 0 {
            return Err(Error::InvalidConfig(
                "max_sift_iterations, max_imfs and boundary_mirror must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-IMF sifting diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftStats {
    pub iterations: usize,
    /// The iteration cap stopped sifting before the criterion was met.
    pub cap_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImfExtraction {
    pub imf: TimeSeries,
    pub stats: SiftStats,
}

/// IMFs (index 1 = highest frequency) and the residue.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    imfs: Vec<TimeSeries>,
    residue: TimeSeries,
    stats: Vec<SiftStats>,
}

impl Decomposition {
    pub fn imfs(&self) -> &[TimeSeries] {
        &self.imfs
    }

    pub fn residue(&self) -> &TimeSeries {
        &self.residue
    }

    pub fn sift_stats(&self) -> &[SiftStats] {
        &self.stats
    }

    pub fn count(&self) -> usize {
        self.imfs.len()
    }

    /// IMF by 1-based index.
    pub fn imf(&self, k: usize) -> Option<&TimeSeries> {
        k.checked_sub(1).and_then(|i| self.imfs.get(i))
    }

    /// Sum of IMFs `lo..=hi` (1-based), truncated to the IMFs that exist.
    /// `None` when the truncated range is empty.
    pub fn sum_range(&self, lo: usize, hi: usize) -> Option<TimeSeries> {
        let lo = lo.max(1);
        let hi = hi.min(self.count());
        if lo > hi {
            return None;
        }
        TimeSeries::sum(&self.imfs[lo - 1..hi]).expect("components share shape")
    }

    pub fn reconstruct(&self) -> TimeSeries {
        let mut acc = self.residue.samples().to_vec();
        for imf in &self.imfs {
            for (a, v) in acc.iter_mut().zip(imf.samples()) {
                *a += v;
            }
        }
        TimeSeries::from_trusted(acc, self.residue.fs())
    }

    /// `max|Σ imfs + residue − x| / max|x|` (absolute when `x` is all zeros).
    pub fn reconstruction_error(&self, x: &TimeSeries) -> f64 {
        let rec = self.reconstruct();
        let err = rec
            .samples()
            .iter()
            .zip(x.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = x.samples().iter().map(|v| v.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }
}

/// Strict local maxima and minima, ascending. A flat run counts once, at its
/// floor midpoint; runs touching either end are never extrema.
pub fn find_extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let n = x.len();
    if n < 3 {
        return (maxima, minima);
    }
    // walk flat runs [start, end]
    let mut start = 0;
    let mut prev: Option<f64> = None;
    while start < n {
        let mut end = start;
        while end + 1 < n && x[end + 1] == x[start] {
            end += 1;
        }
        if let (Some(p), true) = (prev, end + 1 < n) {
            let v = x[start];
            let next = x[end + 1];
            let mid = (start + end) / 2;
            if v > p && v > next {
                maxima.push(mid);
            } else if v < p && v < next {
                minima.push(mid);
            }
        }
        prev = Some(x[start]);
        start = end + 1;
    }
    (maxima, minima)
}

fn count_zero_crossings(x: &[f64]) -> usize {
    let mut last_sign = 0.0;
    let mut crossings = 0;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            crossings += 1;
        }
        last_sign = s;
    }
    crossings
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImfCondition {
    pub extrema: usize,
    pub zero_crossings: usize,
    pub passes: bool,
}

/// Extrema and zero-crossing counts; passes when they differ by at most one.
pub fn imf_condition_check(x: &TimeSeries) -> ImfCondition {
    let (maxima, minima) = find_extrema(x.samples());
    let extrema = maxima.len() + minima.len();
    let zero_crossings = count_zero_crossings(x.samples());
    ImfCondition {
        extrema,
        zero_crossings,
        passes: extrema.abs_diff(zero_crossings) <= 1,
    }
}

fn mirrored_knots(x: &[f64], idx: &[usize], mirror: usize) -> (Vec<f64>, Vec<f64>) {
    let last = (x.len() - 1) as f64;
    let m = mirror.min(idx.len());
    let mut xs = Vec::with_capacity(idx.len() + 2 * m);
    let mut ys = Vec::with_capacity(idx.len() + 2 * m);
    for &i in idx[..m].iter().rev() {
        xs.push(-(i as f64));
        ys.push(x[i]);
    }
    for &i in idx {
        xs.push(i as f64);
        ys.push(x[i]);
    }
    for &i in idx[idx.len() - m..].iter().rev() {
        xs.push(2.0 * last - i as f64);
        ys.push(x[i]);
    }
    (xs, ys)
}

/// Upper and lower cubic-spline envelopes through the given extrema, after
/// mirroring `boundary_mirror` extrema about each end of the signal.
pub fn interpolate_envelopes(
    x: &TimeSeries,
    maxima: &[usize],
    minima: &[usize],
    boundary_mirror: usize,
) -> Result<(TimeSeries, TimeSeries)> {
    let n = x.len();
    let valid = |idx: &[usize]| idx.iter().all(|&i| i > 0 && i + 1 < n) && idx.windows(2).all(|w| w[0] < w[1]);
    if !valid(maxima) || !valid(minima) {
        return Err(Error::InvalidConfig(
            "extrema indices must be interior and strictly ascending".into(),
        ));
    }
    let extended = |k: usize| if k == 0 { 0 } else { k + 2 * boundary_mirror.min(k) };
    if boundary_mirror == 0 || extended(maxima.len()) < 2 || extended(minima.len()) < 2 {
        return Err(Error::TooFewExtrema {
            maxima: maxima.len(),
            minima: minima.len(),
        });
    }
    let (ux, uy) = mirrored_knots(x.samples(), maxima, boundary_mirror);
    let (lx, ly) = mirrored_knots(x.samples(), minima, boundary_mirror);
    let upper = spline::natural_cubic_on_grid(&ux, &uy, n);
    let lower = spline::natural_cubic_on_grid(&lx, &ly, n);
    Ok((
        TimeSeries::new(upper, x.fs())?,
        TimeSeries::new(lower, x.fs())?,
    ))
}

/// One sifting pass: `x − (upper + lower) / 2`.
pub fn sift_once(x: &TimeSeries, cfg: &SiftConfig) -> Result<TimeSeries> {
    let (maxima, minima) = find_extrema(x.samples());
    if maxima.len() + minima.len() < 3 {
        return Err(Error::TooFewExtrema {
            maxima: maxima.len(),
            minima: minima.len(),
        });
    }
    let (upper, lower) = interpolate_envelopes(x, &maxima, &minima, cfg.boundary_mirror)?;
    let h = x
        .samples()
        .iter()
        .zip(upper.samples().iter().zip(lower.samples()))
        .map(|(v, (u, l))| v - 0.5 * (u + l))
        .collect();
    TimeSeries::new(h, x.fs())
}

/// Sifts `x` until the SD criterion and the IMF condition both hold, or the
/// iteration cap is reached.
pub fn extract_imf_with_stats(x: &TimeSeries, cfg: &SiftConfig) -> Result<ImfExtraction> {
    cfg.validate()?;
    let mut h = sift_once(x, cfg)?;
    let mut prev = x.clone();
    let mut iterations = 1;
    loop {
        if sift_converged(&prev, &h, cfg) {
            return Ok(ImfExtraction {
                imf: h,
                stats: SiftStats {
                    iterations,
                    cap_hit: false,
                },
            });
        }
        if iterations >= cfg.max_sift_iterations {
            return Ok(ImfExtraction {
                imf: h,
                stats: SiftStats {
                    iterations,
                    cap_hit: true,
                },
            });
        }
        let next = match sift_once(&h, cfg) {
            Ok(next) => next,
            // the candidate ran out of extrema: nothing further to sift
            Err(Error::TooFewExtrema { .. }) => {
                return Ok(ImfExtraction {
                    imf: h,
                    stats: SiftStats {
                        iterations,
                        cap_hit: false,
                    },
                })
            }
            Err(e) => return Err(e),
        };
        prev = std::mem::replace(&mut h, next);
        iterations += 1;
    }
}

fn sift_converged(prev: &TimeSeries, h: &TimeSeries, cfg: &SiftConfig) -> bool {
    let denom = energy(prev.samples());
    let diff: f64 = prev
        .samples()
        .iter()
        .zip(h.samples())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let sd = if denom > 0.0 { diff / denom } else { 0.0 };
    sd < cfg.sd_threshold && imf_condition_check(h).passes
}

pub fn extract_imf(x: &TimeSeries, cfg: &SiftConfig) -> Result<TimeSeries> {
    extract_imf_with_stats(x, cfg).map(|e| e.imf)
}

/// Full decomposition. Stops when the residue has fewer than three extrema
/// (which includes every monotonic residue) or `max_imfs` IMFs exist.
pub fn decompose(x: &TimeSeries, cfg: &SiftConfig) -> Result<Decomposition> {
    cfg.validate()?;
    if x.len() < 4 {
        return Err(Error::InvalidSeries(format!(
            "decomposition needs at least 4 samples, got {}",
            x.len()
        )));
    }
    let mut residue = x.samples().to_vec();
    let mut imfs = Vec::new();
    let mut stats = Vec::new();
    while imfs.len() < cfg.max_imfs {
        let (maxima, minima) = find_extrema(&residue);
        if maxima.len() + minima.len() < 3 {
            break;
        }
        let current = TimeSeries::from_trusted(residue.clone(), x.fs());
        let extraction = match extract_imf_with_stats(&current, cfg) {
            Ok(e) => e,
            Err(Error::TooFewExtrema { .. }) => break,
            Err(e) => return Err(e),
        };
        for (r, v) in residue.iter_mut().zip(extraction.imf.samples()) {
            *r -= v;
        }
        imfs.push(extraction.imf);
        stats.push(extraction.stats);
    }
    Ok(Decomposition {
        imfs,
        residue: TimeSeries::from_trusted(residue, x.fs()),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec(), 1.0).unwrap()
    }

    /// Brute-force definition: `i` is a maximum if it is the floor midpoint of
    /// a maximal constant block whose outside neighbours are both lower.
    fn brute_extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
        let (mut mx, mut mn) = (vec![], vec![]);
        for i in 0..x.len() {
            let mut l = i;
            while l > 0 && x[l - 1] == x[i] {
                l -= 1;
            }
            let mut r = i;
            while r + 1 < x.len() && x[r + 1] == x[i] {
                r += 1;
            }
            if l == 0 || r + 1 == x.len() || (l + r) / 2 != i {
                continue;
            }
            if x[l - 1] < x[i] && x[r + 1] < x[i] {
                mx.push(i);
            }
            if x[l - 1] > x[i] && x[r + 1] > x[i] {
                mn.push(i);
            }
        }
        (mx, mn)
    }

    #[test]
    fn extrema_examples() {
        assert_eq!(find_extrema(&[0.0, 1.0, 0.0, -1.0, 0.0]), (vec![1], vec![3]));
        assert_eq!(find_extrema(&[0.0, 1.0, 2.0, 3.0]), (vec![], vec![]));
        assert_eq!(find_extrema(&[0.0, 1.0, 1.0, 0.0]), (vec![1], vec![]));
        assert_eq!(find_extrema(&[0.0, 1.0, 1.0, 1.0, 1.0, 0.0]), (vec![2], vec![]));
        assert_eq!(find_extrema(&[1.0, 1.0, 0.0]), (vec![], vec![]));
    }

    #[test]
    fn extrema_match_exhaustive_oracle() {
        // every array of length 3..=7 over {0, 1, 2}
        for len in 3..=7u32 {
            for code in 0..3usize.pow(len) {
                let mut c = code;
                let x: Vec<f64> = (0..len)
                    .map(|_| {
                        let d = c % 3;
                        c /= 3;
                        d as f64
                    })
                    .collect();
                assert_eq!(find_extrema(&x), brute_extrema(&x), "{x:?}");
            }
        }
    }

    #[test]
    fn zero_crossing_counts() {
        assert_eq!(count_zero_crossings(&[1.0, -1.0, 1.0]), 2);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, -1.0]), 1);
        assert_eq!(count_zero_crossings(&[1.0, 0.0, 1.0]), 0);
    }

    #[test]
    fn imf_condition_examples() {
        let s = TimeSeries::from_fn(300, 100.0, |k| (2.0 * PI * k as f64 / 100.0).sin()).unwrap();
        let c = imf_condition_check(&s);
        assert_eq!(c.extrema, 6);
        assert!(c.passes);
        let flat = ts(&[2.0; 10]);
        assert_eq!(
            imf_condition_check(&flat),
            ImfCondition {
                extrema: 0,
                zero_crossings: 0,
                passes: true
            }
        );
        let offset = TimeSeries::from_fn(300, 100.0, |k| 5.0 + (2.0 * PI * k as f64 / 100.0).sin()).unwrap();
        let c = imf_condition_check(&offset);
        assert_eq!(c.zero_crossings, 0);
        assert!(!c.passes);
    }

    #[test]
    fn flat_envelopes_for_constant() {
        let x = ts(&[3.0; 12]);
        let (u, l) = interpolate_envelopes(&x, &[2, 6, 9], &[4, 8], 2).unwrap();
        assert!(u.samples().iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(l.samples().iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn envelope_of_dense_sine_is_near_unity() {
        let x = TimeSeries::from_fn(2000, 1000.0, |k| (2.0 * PI * 5.0 * k as f64 / 1000.0).sin()).unwrap();
        let (mx, mn) = find_extrema(x.samples());
        let (u, l) = interpolate_envelopes(&x, &mx, &mn, 2).unwrap();
        for i in 200..1800 {
            assert!((u.samples()[i] - 1.0).abs() < 0.05);
            assert!((l.samples()[i] + 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn envelope_errors() {
        let x = ts(&[0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            interpolate_envelopes(&x, &[], &[2], 2),
            Err(Error::TooFewExtrema { .. })
        ));
        assert!(interpolate_envelopes(&x, &[0], &[2], 2).is_err());
    }

    #[test]
    fn sift_removes_offset() {
        let n = 1000;
        let fs = 1000.0;
        let x = TimeSeries::from_fn(n, fs, |k| 2.0 + (2.0 * PI * 10.0 * k as f64 / fs).sin()).unwrap();
        let h = sift_once(&x, &SiftConfig::default()).unwrap();
        for k in 100..900 {
            let want = (2.0 * PI * 10.0 * k as f64 / fs).sin();
            assert!((h.samples()[k] - want).abs() < 0.02, "{k}");
        }
    }

    #[test]
    fn sift_needs_three_extrema() {
        let x = ts(&[0.0, 1.0, 0.0, 0.5]);
        assert!(matches!(
            sift_once(&x, &SiftConfig::default()),
            Err(Error::TooFewExtrema { .. })
        ));
    }

    #[test]
    fn cap_of_one_is_a_single_sift() {
        let x = TimeSeries::from_fn(500, 100.0, |k| {
            let t = k as f64 / 100.0;
            (2.0 * PI * 3.0 * t).sin() + 0.3 * (2.0 * PI * 0.4 * t).sin() + 0.1 * t
        })
        .unwrap();
        let cfg = SiftConfig {
            max_sift_iterations: 1,
            ..SiftConfig::default()
        };
        assert_eq!(extract_imf(&x, &cfg).unwrap(), sift_once(&x, &cfg).unwrap());
    }

    #[test]
    fn monotonic_ramp_has_no_imfs() {
        let x = TimeSeries::from_fn(100, 10.0, |k| k as f64 * 0.3).unwrap();
        let d = decompose(&x, &SiftConfig::default()).unwrap();
        assert_eq!(d.count(), 0);
        assert_eq!(d.residue(), &x);
    }

    #[test]
    fn decompose_rejects_short_input() {
        assert!(decompose(&ts(&[1.0, 2.0, 1.0]), &SiftConfig::default()).is_err());
    }

    #[test]
    fn sum_range_truncates() {
        let x = TimeSeries::from_fn(1000, 100.0, |k| (2.0 * PI * 7.0 * k as f64 / 100.0).sin()).unwrap();
        let d = decompose(&x, &SiftConfig::default()).unwrap();
        let k = d.count();
        assert!(k >= 1);
        assert!(d.sum_range(k + 1, k + 5).is_none());
        assert_eq!(d.sum_range(1, 100).unwrap().len(), 1000);
        assert_eq!(d.imf(0), None);
    }

    #[test]
    fn invalid_config_rejected() {
        let x = ts(&[0.0, 1.0, 0.0, 1.0, 0.0]);
        let bad = SiftConfig {
            sd_threshold: 0.0,
            ..SiftConfig::default()
        };
        assert!(matches!(decompose(&x, &bad), Err(Error::InvalidConfig(_))));
    }
}
