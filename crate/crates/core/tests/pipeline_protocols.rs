mod common;

use common::{series, white};
use ecg_anc::adaptive::{anc_denoise, FilterSpec, StepMode};
use ecg_anc::noise::{mix, synthetic_ecg, NoiseKind, NoiseSpec, NoisyRecord, ReferenceSpec};
use ecg_anc::pipelines::{
    run_pipeline, select_imf_combination, Candidate, PipelineConfig, PipelineKind, SelectionSetup, Stage,
};
use ecg_anc::signal::{power, snr};
use ecg_anc::TimeSeries;

const FS: f64 = 360.0;
const N: usize = 3600;

fn ecg() -> TimeSeries {
    synthetic_ecg(FS, N, 72.0).unwrap()
}

fn record(kinds: &[NoiseKind], snr_db: f64, seed: u64) -> NoisyRecord {
    let noises: Vec<NoiseSpec> = kinds.iter().map(|&k| NoiseSpec::synthetic(k, FS, N, seed).unwrap()).collect();
    mix(&ecg(), &noises, snr_db, &ReferenceSpec::default()).unwrap().with_id("synthetic", seed)
}

/// Fills in white-noise references for the kinds not present, at the scale of the existing ones.
fn with_idle_references(mut rec: NoisyRecord, seed: u64) -> NoisyRecord {
    let scale = power(rec.references.values().next().unwrap()).sqrt();
    for (i, kind) in NoiseKind::ALL.into_iter().enumerate() {
        if !rec.references.contains_key(&kind) {
            let w = white(N, 1000 * seed + i as u64).into_iter().map(|v| scale * v).collect();
            rec = rec.with_reference(kind, series(w, FS)).unwrap();
        }
    }
    rec
}

fn pli_stage() -> FilterSpec {
    FilterSpec::lms().with_taps(2).with_step_mode(StepMode::ReferencePower)
}

#[test]
fn bw_pli_improves_snr() {
    let rec = record(&[NoiseKind::Bw, NoiseKind::Pli], 10.0, 1);
    let run = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::BwPli, FilterSpec::lms())).unwrap();
    assert!(run.result.snr_imp_db > 0.0, "{}", run.result.snr_imp_db);
}

#[test]
fn four_noise_pipelines_improve_snr() {
    let rec = record(&NoiseKind::ALL, 10.0, 1);
    for kind in PipelineKind::MULTI_NOISE {
        let run = run_pipeline(&rec, &PipelineConfig::new(kind, FilterSpec::lms())).unwrap();
        assert!(run.result.snr_imp_db > 0.0, "{kind}: {}", run.result.snr_imp_db);
        let direct = snr(&rec.clean, &run.denoised).unwrap() - snr(&rec.clean, &rec.noisy).unwrap();
        assert!((run.result.snr_imp_db - direct).abs() <= 1e-9);
    }
}

#[test]
fn pdaf_is_anc_on_the_combined_reference() {
    let rec = record(&NoiseKind::ALL, 5.0, 2);
    let spec = FilterSpec::nlms().with_mu(0.05);
    let run = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::Pdaf, spec)).unwrap();
    let direct = anc_denoise(&rec.noisy, &rec.combined_reference().unwrap(), &spec).unwrap();
    assert_eq!(run.denoised, direct.denoised);
}

#[test]
fn fixed_seed_gives_identical_results() {
    for kind in PipelineKind::MULTI_NOISE {
        let cfg = PipelineConfig::new(kind, FilterSpec::lms());
        let a = run_pipeline(&record(&NoiseKind::ALL, 10.0, 3), &cfg).unwrap();
        let b = run_pipeline(&record(&NoiseKind::ALL, 10.0, 3), &cfg).unwrap();
        assert_eq!(a.denoised, b.denoised);
        assert_eq!(a.result.without_timing(), b.result.without_timing());
    }
}

#[test]
fn sdaf_on_pli_only_matches_a_single_filter() {
    let rec = with_idle_references(record(&[NoiseKind::Pli], 10.0, 4), 4);
    let cfg = PipelineConfig::new(PipelineKind::Sdaf, FilterSpec::lms()).with_stage(Stage::Pli, pli_stage());
    let cascade = run_pipeline(&rec, &cfg).unwrap();
    let single = anc_denoise(&rec.noisy, rec.reference(NoiseKind::Pli).unwrap(), &pli_stage()).unwrap();
    let single_snr = snr(&rec.clean, &single.denoised).unwrap();
    assert!((cascade.result.snr_out_db - single_snr).abs() <= 0.5, "{} vs {single_snr}", cascade.result.snr_out_db);
}

#[test]
fn peaf_does_not_lose_to_pdaf_on_em_only() {
    for seed in 0..10 {
        let rec = with_idle_references(record(&[NoiseKind::Em], 10.0, seed), seed);
        let peaf = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::Peaf, FilterSpec::lms())).unwrap();
        let pdaf = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::Pdaf, FilterSpec::lms())).unwrap();
        assert!(peaf.result.snr_out_db >= pdaf.result.snr_out_db - 1.0, "seed {seed}");
    }
}

#[test]
fn seaf_and_peaf_agree_on_bw_only() {
    for seed in 0..3 {
        let rec = with_idle_references(record(&[NoiseKind::Bw], 10.0, seed), seed);
        let seaf = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::Seaf, FilterSpec::lms())).unwrap();
        let peaf = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::Peaf, FilterSpec::lms())).unwrap();
        assert!((seaf.result.snr_out_db - peaf.result.snr_out_db).abs() <= 0.5, "seed {seed}");
    }
}

#[test]
fn seaf_without_ma_reference_is_rejected() {
    let rec = record(&[NoiseKind::Bw, NoiseKind::Pli, NoiseKind::Em], 10.0, 5);
    let err = run_pipeline(&rec, &PipelineConfig::new(PipelineKind::Seaf, FilterSpec::lms())).unwrap_err();
    assert!(matches!(err, ecg_anc::Error::MissingReference(NoiseKind::Ma)));
}

#[test]
fn selection_table_is_exhaustive() {
    let setup = SelectionSetup {
        filter: FilterSpec::lms().with_step_mode(StepMode::ReferencePower),
        ..Default::default()
    };
    let noise = NoiseSpec::synthetic(NoiseKind::Pli, FS, N, 0).unwrap();
    let out = select_imf_combination(&ecg(), &noise, &setup).unwrap();
    let k = out.imf_count;
    assert_eq!(out.table.len(), k * (k + 1) / 2 + 1);
    assert_eq!(out.table.last().unwrap().candidate, Candidate::WholeSignal);
    let best = out.table.iter().map(|c| c.snr_imp_db).fold(f64::MIN, f64::max);
    let winner = out.table.iter().find(|c| c.candidate == out.best).unwrap();
    assert_eq!(winner.snr_imp_db, best);
    assert_eq!(out.best, Candidate::range(1, 1));
    for row in &out.table {
        assert!(row.snr_imp_db.is_finite());
    }
}
