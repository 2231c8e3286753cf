//! Denoising architectures built from EMD and noise-cancelling filters.
//!
//! * **BWPLI**: decompose; cancel PLI on IMF1 and BW on IMF5..8; rebuild
//!   `Y = IMF'1 + IMF2 + IMF3 + IMF4 + IMF'58 + r`.
//! * **PDAF**: one filter on the whole signal with the sum of all references.
//! * **SDAF**: four whole-signal filters in cascade (BW → PLI → EM → MA).
//! * **PEAF**: parallel: PLI on IMF1, EM on IMF3..8 and BW on IMF5..8 side by
//!   side, `X' = IMF'1 + IMF2 + IMF'38 + IMF'58 + r − Σ IMF5..8`, then MA on `X'`.
//! * **SEAF**: staged: BW on IMF5..8 first, EM on `IMF3 + IMF4 + IMF'58`,
//!   `X' = IMF'1 + IMF2 + IMF'38 + r`, then MA on `X'`.
//!
//! IMF ranges come from an [`ImfSelection`]; when a decomposition has fewer
//! IMFs than a range asks for, the range is truncated (an empty range skips
//! its stage). With every filter frozen, each architecture returns the noisy
//! input unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::{anc_denoise, AncResult, FilterSpec};
use crate::emd::{decompose, Decomposition, SiftConfig};
use crate::error::{Error, Result};
use crate::noise::{mix, NoiseKind, NoiseSpec, NoisyRecord, ReferenceSpec};
use crate::signal::{rmse, snr, snr_improvement, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    BwPli,
    Sdaf,
    Pdaf,
    Seaf,
    Peaf,
}

impl PipelineKind {
    pub const MULTI_NOISE: [PipelineKind; 4] =
        [PipelineKind::Sdaf, PipelineKind::Pdaf, PipelineKind::Seaf, PipelineKind::Peaf];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::BwPli => "bwpli",
            PipelineKind::Sdaf => "sdaf",
            PipelineKind::Pdaf => "pdaf",
            PipelineKind::Seaf => "seaf",
            PipelineKind::Peaf => "peaf",
        }
    }

    /// Filter stages this architecture needs.
    pub fn stages(self) -> &'static [Stage] {
        match self {
            PipelineKind::BwPli => &[Stage::Pli, Stage::Bw],
            PipelineKind::Pdaf => &[Stage::Combined],
            PipelineKind::Sdaf | PipelineKind::Seaf | PipelineKind::Peaf => {
                &[Stage::Pli, Stage::Bw, Stage::Em, Stage::Ma]
            }
        }
    }

    /// Noise references this architecture reads from a record.
    pub fn required_references(self) -> &'static [NoiseKind] {
        match self {
            PipelineKind::BwPli => &[NoiseKind::Pli, NoiseKind::Bw],
            PipelineKind::Pdaf => &[],
            _ => &NoiseKind::ALL,
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bwpli" | "bw+pli" => Ok(PipelineKind::BwPli),
            "sdaf" => Ok(PipelineKind::Sdaf),
            "pdaf" => Ok(PipelineKind::Pdaf),
            "seaf" => Ok(PipelineKind::Seaf),
            "peaf" => Ok(PipelineKind::Peaf),
            other => Err(Error::InvalidConfig(format!("unknown pipeline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pli,
    Bw,
    Em,
    Ma,
    Combined,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pli => "pli",
            Stage::Bw => "bw",
            Stage::Em => "em",
            Stage::Ma => "ma",
            Stage::Combined => "combined",
        }
    }

    fn for_kind(kind: NoiseKind) -> Stage {
        match kind {
            NoiseKind::Pli => Stage::Pli,
            NoiseKind::Bw => Stage::Bw,
            NoiseKind::Em => Stage::Em,
            NoiseKind::Ma => Stage::Ma,
        }
    }
}

/// Which part of the decomposition a filter works on. Written as `lo..hi`
/// or `whole_signal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Candidate {
    /// IMFs `lo..=hi`, 1-based.
    Range { lo: usize, hi: usize },
    /// The undecomposed signal.
    WholeSignal,
}

impl Candidate {
    pub fn range(lo: usize, hi: usize) -> Self {
        Candidate::Range { lo, hi }
    }

    /// Range clipped to `count` IMFs; `None` if nothing is left.
    fn truncated(self, count: usize) -> Option<(usize, usize)> {
        match self {
            Candidate::Range { lo, hi } if lo <= hi.min(count) => Some((lo, hi.min(count))),
            _ => None,
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Range { lo, hi } => write!(f, "{lo}..{hi}"),
            Candidate::WholeSignal => f.write_str("whole_signal"),
        }
    }
}

impl FromStr for Candidate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "whole_signal" || s == "whole" {
            return Ok(Candidate::WholeSignal);
        }
        let parsed = s
            .split_once("..")
            .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)));
        match parsed {
            Some((lo, hi)) => Ok(Candidate::range(lo, hi)),
            None => Err(Error::InvalidConfig(format!("`{s}` is neither `lo..hi` nor `whole_signal`"))),
        }
    }
}

impl TryFrom<String> for Candidate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Candidate> for String {
    fn from(c: Candidate) -> String {
        c.to_string()
    }
}

/// IMF ranges used per noise kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImfSelection {
    pub pli: Candidate,
    pub bw: Candidate,
    pub em: Candidate,
    pub ma: Candidate,
}

impl Default for ImfSelection {
    fn default() -> Self {
        ImfSelection {
            pli: Candidate::range(1, 1),
            bw: Candidate::range(5, 8),
            em: Candidate::range(3, 8),
            ma: Candidate::WholeSignal,
        }
    }
}

impl ImfSelection {
    pub fn get(&self, kind: NoiseKind) -> Candidate {
        match kind {
            NoiseKind::Pli => self.pli,
            NoiseKind::Bw => self.bw,
            NoiseKind::Em => self.em,
            NoiseKind::Ma => self.ma,
        }
    }

    fn validate(&self, kind: PipelineKind) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for k in NoiseKind::ALL {
            if let Candidate::Range { lo, hi } = self.get(k) {
                if lo < 1 || lo > hi {
                    return bad(format!("{k} range {lo}..{hi} must satisfy 1 <= lo <= hi"));
                }
            }
        }
        let needs_range: &[NoiseKind] = match kind {
            PipelineKind::BwPli => &[NoiseKind::Pli, NoiseKind::Bw],
            PipelineKind::Seaf | PipelineKind::Peaf => &[NoiseKind::Pli, NoiseKind::Bw, NoiseKind::Em],
            _ => &[],
        };
        for &k in needs_range {
            if self.get(k) == Candidate::WholeSignal {
                return bad(format!("{kind} needs an IMF range for {k}"));
            }
        }
        if kind == PipelineKind::Seaf {
            let (Candidate::Range { lo: bl, hi: bh }, Candidate::Range { lo: el, hi: eh }, Candidate::Range { hi: ph, .. }) =
                (self.bw, self.em, self.pli)
            else {
                unreachable!("checked above")
            };
            if bl < el || bh > eh {
                return bad("SEAF needs the BW range inside the EM range".into());
            }
            if ph >= el {
                return bad("SEAF needs the PLI range below the EM range".into());
            }
        }
        Ok(())
    }
}

/// Architecture, IMF ranges, and one filter spec per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub selection: ImfSelection,
    pub stages: BTreeMap<Stage, FilterSpec>,
    pub sift: SiftConfig,
    /// Order of the SDAF cascade.
    pub sdaf_order: [NoiseKind; 4],
    /// Leading samples excluded from the reported metrics.
    pub skip_samples: usize,
}

impl PipelineConfig {
    /// Every required stage uses `spec`.
    pub fn new(kind: PipelineKind, spec: FilterSpec) -> Self {
        PipelineConfig {
            kind,
            selection: ImfSelection::default(),
            stages: kind.stages().iter().map(|&s| (s, spec)).collect(),
            sift: SiftConfig::default(),
            sdaf_order: [NoiseKind::Bw, NoiseKind::Pli, NoiseKind::Em, NoiseKind::Ma],
            skip_samples: 0,
        }
    }

    pub fn with_stage(mut self, stage: Stage, spec: FilterSpec) -> Self {
        self.stages.insert(stage, spec);
        self
    }

    /// Same configuration with every filter frozen.
    pub fn frozen(mut self) -> Self {
        for spec in self.stages.values_mut() {
            *spec = spec.frozen();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for stage in self.kind.stages() {
            self.stages
                .get(stage)
                .ok_or_else(|| Error::InvalidConfig(format!("{} needs a `{}` stage", self.kind, stage.name())))?
                .validate()?;
        }
        self.sift.validate()?;
        self.selection.validate(self.kind)?;
        let mut order = self.sdaf_order;
        order.sort();
        if order != NoiseKind::ALL {
            return Err(Error::InvalidConfig("SDAF order must list each noise once".into()));
        }
        Ok(())
    }

    fn spec(&self, stage: Stage) -> &FilterSpec {
        &self.stages[&stage]
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub record: String,
    pub pipeline: PipelineKind,
    pub snr_in_db: f64,
    pub snr_out_db: f64,
    pub snr_imp_db: f64,
    pub rmse: f64,
    pub runtime_ms: f64,
    pub seed: u64,
}

impl ExperimentResult {
    pub const CSV_HEADER: &'static str = "record,pipeline,snr_in_db,snr_out_db,snr_imp_db,rmse,runtime_ms,seed";

    /// Same row with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        ExperimentResult {
            runtime_ms: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub denoised: TimeSeries,
    pub result: ExperimentResult,
}

fn stage_anc(input: &TimeSeries, reference: &TimeSeries, spec: &FilterSpec, stage: Stage) -> Result<AncResult> {
    anc_denoise(input, reference, spec).map_err(|e| e.in_stage(stage.name()))
}

fn finish(record: &NoisyRecord, config: &PipelineConfig, denoised: TimeSeries, started: Instant) -> Result<PipelineRun> {
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let skip = config.skip_samples;
    let window = |s: &TimeSeries| if skip == 0 { Ok(s.clone()) } else { s.tail(skip) };
    let (c, n, d) = (window(&record.clean)?, window(&record.noisy)?, window(&denoised)?);
    let result = ExperimentResult {
        record: record.id.clone(),
        pipeline: config.kind,
        snr_in_db: snr(&c, &n)?,
        snr_out_db: snr(&c, &d)?,
        snr_imp_db: snr_improvement(&c, &n, &d)?,
        rmse: rmse(&c, &d)?,
        runtime_ms,
        seed: record.seed,
    };
    Ok(PipelineRun { denoised, result })
}

fn check_record(record: &NoisyRecord, config: &PipelineConfig, kind: PipelineKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::InvalidConfig(format!("config is for {}, called as {kind}", config.kind)));
    }
    config.validate()?;
    for &k in kind.required_references() {
        record.reference(k)?;
    }
    Ok(())
}

/// A stage working on a sum of IMFs, plus what it contributes to the rebuild.
struct RangeStage {
    range: Option<(usize, usize)>,
    denoised: Option<TimeSeries>,
}

fn run_range_stage(d: &Decomposition, record: &NoisyRecord, config: &PipelineConfig, kind: NoiseKind) -> Result<RangeStage> {
    let range = config.selection.get(kind).truncated(d.count());
    let denoised = match range {
        Some((lo, hi)) => {
            let input = d.sum_range(lo, hi).expect("nonempty range");
            let stage = Stage::for_kind(kind);
            Some(stage_anc(&input, record.reference(kind)?, config.spec(stage), stage)?.denoised)
        }
        None => None,
    };
    Ok(RangeStage { range, denoised })
}

/// `Σ stage outputs + Σ_k (1 − c_k) · IMF_k + r`, where `c_k` counts the stages
/// whose range covers IMF `k`. Reduces to the plain IMF sum when filters are frozen.
fn rebuild(d: &Decomposition, stages: &[&RangeStage]) -> TimeSeries {
    let mut acc = d.residue().samples().to_vec();
    for (i, imf) in d.imfs().iter().enumerate() {
        let k = i + 1;
        let covered = stages
            .iter()
            .filter(|s| matches!(s.range, Some((lo, hi)) if lo <= k && k <= hi))
            .count() as f64;
        let weight = 1.0 - covered;
        if weight != 0.0 {
            for (a, v) in acc.iter_mut().zip(imf.samples()) {
                *a += weight * v;
            }
        }
    }
    for s in stages {
        if let Some(out) = &s.denoised {
            for (a, v) in acc.iter_mut().zip(out.samples()) {
                *a += v;
            }
        }
    }
    TimeSeries::from_trusted(acc, d.residue().fs())
}

/// EMD-based BW and PLI removal.
pub fn denoise_bw_pli(record: &NoisyRecord, config: &PipelineConfig) -> Result<PipelineRun> {
    check_record(record, config, PipelineKind::BwPli)?;
    let started = Instant::now();
    let d = decompose(&record.noisy, &config.sift)?;
    let pli = run_range_stage(&d, record, config, NoiseKind::Pli)?;
    let bw = run_range_stage(&d, record, config, NoiseKind::Bw)?;
    let out = rebuild(&d, &[&pli, &bw]);
    finish(record, config, out, started)
}

/// Whole-signal cancellation with the sum of all references.
pub fn run_pdaf(record: &NoisyRecord, config: &PipelineConfig) -> Result<PipelineRun> {
    check_record(record, config, PipelineKind::Pdaf)?;
    let started = Instant::now();
    let reference = record.combined_reference()?;
    let out = stage_anc(&record.noisy, &reference, config.spec(Stage::Combined), Stage::Combined)?;
    finish(record, config, out.denoised, started)
}

/// Cascade of whole-signal filters, one per noise kind.
pub fn run_sdaf(record: &NoisyRecord, config: &PipelineConfig) -> Result<PipelineRun> {
    check_record(record, config, PipelineKind::Sdaf)?;
    let started = Instant::now();
    let mut current = record.noisy.clone();
    for kind in config.sdaf_order {
        let stage = Stage::for_kind(kind);
        current = stage_anc(&current, record.reference(kind)?, config.spec(stage), stage)?.denoised;
    }
    finish(record, config, current, started)
}

fn ma_stage(x: TimeSeries, record: &NoisyRecord, config: &PipelineConfig) -> Result<TimeSeries> {
    Ok(stage_anc(&x, record.reference(NoiseKind::Ma)?, config.spec(Stage::Ma), Stage::Ma)?.denoised)
}

/// Parallel EMD architecture.
pub fn run_peaf(record: &NoisyRecord, config: &PipelineConfig) -> Result<PipelineRun> {
    check_record(record, config, PipelineKind::Peaf)?;
    let started = Instant::now();
    let d = decompose(&record.noisy, &config.sift)?;
    let pli = run_range_stage(&d, record, config, NoiseKind::Pli)?;
    let em = run_range_stage(&d, record, config, NoiseKind::Em)?;
    let bw = run_range_stage(&d, record, config, NoiseKind::Bw)?;
    let x = rebuild(&d, &[&pli, &em, &bw]);
    let out = ma_stage(x, record, config)?;
    finish(record, config, out, started)
}

/// Staged EMD architecture.
pub fn run_seaf(record: &NoisyRecord, config: &PipelineConfig) -> Result<PipelineRun> {
    check_record(record, config, PipelineKind::Seaf)?;
    let started = Instant::now();
    let d = decompose(&record.noisy, &config.sift)?;
    let pli = run_range_stage(&d, record, config, NoiseKind::Pli)?;
    let bw = run_range_stage(&d, record, config, NoiseKind::Bw)?;

    // EM input: the EM-range IMFs outside the BW range, plus the BW stage output
    let em_range = config.selection.em.truncated(d.count());
    let mut em_input: Option<TimeSeries> = None;
    if let Some((lo, hi)) = em_range {
        let mut parts: Vec<&TimeSeries> = (lo..=hi)
            .filter(|&k| !matches!(bw.range, Some((bl, bh)) if bl <= k && k <= bh))
            .filter_map(|k| d.imf(k))
            .collect();
        if let Some(b) = &bw.denoised {
            parts.push(b);
        }
        em_input = TimeSeries::sum(parts)?;
    }
    let em = RangeStage {
        range: em_range,
        denoised: match em_input {
            Some(input) => Some(stage_anc(&input, record.reference(NoiseKind::Em)?, config.spec(Stage::Em), Stage::Em)?.denoised),
            None => None,
        },
    };
    // the BW output is already inside the EM output; the BW range is covered by `em`
    let x = rebuild(&d, &[&pli, &em]);
    let out = ma_stage(x, record, config)?;
    finish(record, config, out, started)
}

/// Runs whichever architecture `config.kind` names.
pub fn run_pipeline(record: &NoisyRecord, config: &PipelineConfig) -> Result<PipelineRun> {
    match config.kind {
        PipelineKind::BwPli => denoise_bw_pli(record, config),
        PipelineKind::Sdaf => run_sdaf(record, config),
        PipelineKind::Pdaf => run_pdaf(record, config),
        PipelineKind::Seaf => run_seaf(record, config),
        PipelineKind::Peaf => run_peaf(record, config),
    }
}

/// Settings for an IMF-combination study.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSetup {
    pub snr_db: f64,
    pub reference: ReferenceSpec,
    pub filter: FilterSpec,
    pub sift: SiftConfig,
    pub skip_samples: usize,
}

impl Default for SelectionSetup {
    fn default() -> Self {
        SelectionSetup {
            snr_db: 10.0,
            reference: ReferenceSpec::default(),
            filter: FilterSpec::default(),
            sift: SiftConfig::default(),
            skip_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    pub snr_imp_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub best: Candidate,
    pub imf_count: usize,
    pub table: Vec<CandidateScore>,
    pub decomposition: Decomposition,
    pub record: NoisyRecord,
}

/// Tries every contiguous IMF range and the whole signal as the filter input
/// for one noise; scores each by SNR improvement of the rebuilt signal.
///
/// Ties prefer fewer IMFs, then the lower starting index.
pub fn select_imf_combination(clean: &TimeSeries, noise: &NoiseSpec, setup: &SelectionSetup) -> Result<SelectionOutcome> {
    let record = mix(clean, std::slice::from_ref(noise), setup.snr_db, &setup.reference)?;
    let reference = record.reference(noise.kind)?;
    let d = decompose(&record.noisy, &setup.sift)?;
    let k = d.count();

    let mut candidates: Vec<Candidate> = (1..=k)
        .flat_map(|lo| (lo..=k).map(move |hi| Candidate::range(lo, hi)))
        .collect();
    candidates.push(Candidate::WholeSignal);

    let skip = setup.skip_samples;
    let window = |s: &TimeSeries| if skip == 0 { Ok(s.clone()) } else { s.tail(skip) };
    let clean_w = window(&record.clean)?;
    let noisy_w = window(&record.noisy)?;

    let mut table = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let rebuilt = match candidate {
            Candidate::WholeSignal => anc_denoise(&record.noisy, reference, &setup.filter)?.denoised,
            Candidate::Range { lo, hi } => {
                let input = d.sum_range(lo, hi).expect("range within count");
                let denoised = anc_denoise(&input, reference, &setup.filter)?.denoised;
                let stage = RangeStage {
                    range: Some((lo, hi)),
                    denoised: Some(denoised),
                };
                rebuild(&d, &[&stage])
            }
        };
        let snr_imp_db = snr_improvement(&clean_w, &noisy_w, &window(&rebuilt)?)?;
        table.push(CandidateScore { candidate, snr_imp_db });
    }

    let size = |c: Candidate| match c {
        Candidate::Range { lo, hi } => (hi - lo + 1, lo),
        Candidate::WholeSignal => (k + 1, 0),
    };
    let best = table
        .iter()
        .max_by(|a, b| {
            a.snr_imp_db
                .total_cmp(&b.snr_imp_db)
                .then_with(|| size(b.candidate).cmp(&size(a.candidate)))
        })
        .expect("at least the whole-signal candidate")
        .candidate;

    Ok(SelectionOutcome {
        best,
        imf_count: k,
        table,
        decomposition: d,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{synthetic_ecg, NoiseSpec, PliParams};

    fn four_noise_record(seed: u64) -> NoisyRecord {
        let fs = 360.0;
        let n = 1800;
        let clean = synthetic_ecg(fs, n, 72.0).unwrap();
        let noises: Vec<NoiseSpec> = NoiseKind::ALL
            .iter()
            .map(|&k| NoiseSpec::synthetic(k, fs, n, seed).unwrap())
            .collect();
        mix(&clean, &noises, 10.0, &ReferenceSpec::default()).unwrap()
    }

    #[test]
    fn parses_kinds() {
        for k in [PipelineKind::BwPli, PipelineKind::Sdaf, PipelineKind::Pdaf, PipelineKind::Seaf, PipelineKind::Peaf] {
            assert_eq!(k.as_str().parse::<PipelineKind>().unwrap(), k);
        }
        assert!("xyz".parse::<PipelineKind>().is_err());
    }

    #[test]
    fn candidates_parse_and_print() {
        assert_eq!("5..8".parse::<Candidate>().unwrap(), Candidate::range(5, 8));
        assert_eq!(" whole_signal ".parse::<Candidate>().unwrap(), Candidate::WholeSignal);
        assert!("5-8".parse::<Candidate>().is_err());
        for c in [Candidate::range(3, 8), Candidate::WholeSignal] {
            assert_eq!(c.to_string().parse::<Candidate>().unwrap(), c);
        }
    }

    #[test]
    fn frozen_pipelines_return_noisy_input() {
        let rec = four_noise_record(1);
        for kind in PipelineKind::MULTI_NOISE.into_iter().chain([PipelineKind::BwPli]) {
            let cfg = PipelineConfig::new(kind, FilterSpec::lms()).frozen();
            let run = run_pipeline(&rec, &cfg).unwrap();
            let worst = run
                .denoised
                .samples()
                .iter()
                .zip(rec.noisy.samples())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-10, "{kind}: {worst}");
        }
    }

    #[test]
    fn missing_reference_is_reported() {
        let clean = synthetic_ecg(360.0, 720, 72.0).unwrap();
        let rec = mix(&clean, &[NoiseSpec::pli(PliParams::default())], 10.0, &ReferenceSpec::default()).unwrap();
        let cfg = PipelineConfig::new(PipelineKind::Seaf, FilterSpec::lms());
        assert!(matches!(run_seaf(&rec, &cfg), Err(Error::MissingReference(NoiseKind::Bw))));
        let cfg = PipelineConfig::new(PipelineKind::BwPli, FilterSpec::lms());
        assert!(matches!(denoise_bw_pli(&rec, &cfg), Err(Error::MissingReference(NoiseKind::Bw))));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::new(PipelineKind::Peaf, FilterSpec::lms());
        cfg.stages.remove(&Stage::Em);
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::new(PipelineKind::Seaf, FilterSpec::lms());
        cfg.selection.bw = Candidate::range(2, 9);
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::new(PipelineKind::BwPli, FilterSpec::lms());
        cfg.selection.pli = Candidate::WholeSignal;
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig::new(PipelineKind::Pdaf, FilterSpec::lms());
        let rec = four_noise_record(2);
        assert!(run_sdaf(&rec, &cfg).is_err());
    }

    #[test]
    fn divergence_names_the_stage() {
        let rec = four_noise_record(3);
        let cfg = PipelineConfig::new(PipelineKind::Sdaf, FilterSpec::lms())
            .with_stage(Stage::Pli, FilterSpec::lms().with_mu(1e9));
        match run_sdaf(&rec, &cfg) {
            Err(Error::Diverged { stage: Some("pli"), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rebuild_weights_overlaps() {
        let rec = four_noise_record(4);
        let d = decompose(&rec.noisy, &SiftConfig::default()).unwrap();
        assert!(d.count() >= 8);
        // two untouched stages over overlapping ranges still reproduce the input
        let a = RangeStage {
            range: Some((3, 8)),
            denoised: d.sum_range(3, 8),
        };
        let b = RangeStage {
            range: Some((5, 8)),
            denoised: d.sum_range(5, 8),
        };
        let x = rebuild(&d, &[&a, &b]);
        for (u, v) in x.samples().iter().zip(rec.noisy.samples()) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
