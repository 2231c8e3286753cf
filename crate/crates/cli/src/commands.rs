//! The four verbs. Each returns the manifest it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ecg_anc::dataio::{csv_sample_rate, fmt_f64, read_csv, read_record, write_results, write_series, Column};
use ecg_anc::emd::decompose;
use ecg_anc::noise::{mix, synthetic_ecg, NoiseKind, NoiseSpec, NoisyRecord, PliParams};
use ecg_anc::pipelines::{run_pipeline, select_imf_combination, Candidate, ExperimentResult, PipelineKind, SelectionSetup};
use ecg_anc::signal::bin_magnitude;
use ecg_anc::TimeSeries;
use rayon::prelude::*;
use serde::Serialize;

use crate::plot::{self, Series};
use crate::{CliError, InputSource, RunManifest, Settings};

const DEFAULT_FS: f64 = 360.0;
const DEFAULT_SWEEP_SNR: [f64; 3] = [5.0, 10.0, 15.0];
const DEFAULT_TRIALS: usize = 5;

/// A clean record and where it came from.
pub struct CleanRecord {
    pub id: String,
    pub source: InputSource,
    pub clean: TimeSeries,
}

pub fn load_records(s: &Settings) -> Result<Vec<CleanRecord>, CliError> {
    let mut records = Vec::new();
    if s.synthetic_ecg {
        let fs = s.fs.unwrap_or(DEFAULT_FS);
        let duration = s.duration.unwrap_or(10.0);
        let bpm = s.bpm.unwrap_or(72.0);
        let samples = (duration * fs).round() as usize;
        records.push(CleanRecord {
            id: "synthetic".into(),
            source: InputSource::Synthetic {
                id: "synthetic".into(),
                fs,
                samples,
                bpm,
            },
            clean: synthetic_ecg(fs, samples, bpm)?,
        });
    }
    for path in s.input.iter().flatten() {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "record".into());
        let clean = read_signal(path, s.column.as_deref(), s.channel, s.fs)?;
        records.push(CleanRecord {
            id: id.clone(),
            source: InputSource::File {
                id,
                path: path.clone(),
                channel: s.channel,
            },
            clean,
        });
    }
    if records.is_empty() {
        return Err(CliError::config("no input: pass --input PATH or --synthetic-ecg"));
    }
    Ok(records)
}

fn read_signal(path: &Path, column: Option<&str>, channel: Option<usize>, fs: Option<f64>) -> Result<TimeSeries, CliError> {
    if path.extension().is_some_and(|e| e == "hea") {
        let channel = channel.unwrap_or(0);
        let mut channels = read_record(path)?;
        if channel >= channels.len() {
            return Err(CliError::config(format!(
                "{}: channel {channel} requested, record has {}",
                path.display(),
                channels.len()
            )));
        }
        return Ok(channels.swap_remove(channel));
    }
    let column: Column = column.unwrap_or("0").parse()?;
    Ok(read_csv(path, &column, fs)?)
}

fn single<'a, T>(items: &'a [T], what: &str) -> Result<&'a T, CliError> {
    match items {
        [one] => Ok(one),
        [] => Err(CliError::config(format!("{what} is required"))),
        _ => Err(CliError::config(format!("this command takes a single {what}"))),
    }
}

fn noise_files(s: &Settings) -> Result<BTreeMap<NoiseKind, PathBuf>, CliError> {
    let mut files = BTreeMap::new();
    for entry in s.noise_file.iter().flatten() {
        let (kind, path) = entry
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--noise-file `{entry}` is not KIND=PATH")))?;
        files.insert(kind.parse::<NoiseKind>()?, PathBuf::from(path));
    }
    Ok(files)
}

/// Noise sources for `kinds`: recorded where a file is given, synthetic otherwise.
fn noise_specs(kinds: &[NoiseKind], s: &Settings, clean: &TimeSeries, seed: Option<u64>) -> Result<Vec<NoiseSpec>, CliError> {
    let files = noise_files(s)?;
    kinds
        .iter()
        .map(|&kind| {
            if let Some(path) = files.get(&kind) {
                // noise CSVs without an `# fs=` line are taken at the record's rate
                let fs = match path.extension().is_some_and(|e| e == "hea") {
                    true => None,
                    false => Some(csv_sample_rate(path)?.unwrap_or(clean.fs())),
                };
                let source = read_signal(path, None, None, fs)?;
                return Ok(NoiseSpec::record(kind, source));
            }
            if kind == NoiseKind::Pli {
                return Ok(NoiseSpec::pli(PliParams::default()));
            }
            let seed = seed.ok_or_else(|| {
                CliError::config(format!("--seed is required for synthetic {kind} noise (or pass --noise-file {}=PATH)", kind.as_str()))
            })?;
            Ok(NoiseSpec::synthetic(kind, clean.fs(), clean.len(), seed)?)
        })
        .collect()
}

fn uses_randomness(kinds: &[NoiseKind], s: &Settings) -> Result<bool, CliError> {
    let files = noise_files(s)?;
    Ok(kinds.iter().any(|k| *k != NoiseKind::Pli && !files.contains_key(k)))
}

fn prepare_outdir(s: &Settings) -> Result<PathBuf, CliError> {
    let dir = s.outdir();
    fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(dir: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, manifest: &mut RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    write_text(dir, name, &(text + "\n"), manifest)
}

fn check_references(kind: PipelineKind, noises: &[NoiseKind]) -> Result<(), CliError> {
    for need in kind.required_references() {
        if !noises.contains(need) {
            return Err(CliError::config(format!(
                "pipeline {kind} needs a {need} reference; add {} to --noises",
                need.as_str()
            )));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SiftReport {
    imf: usize,
    iterations: usize,
    cap_hit: bool,
}

#[derive(Serialize)]
struct ReconstructionReport {
    record: String,
    samples: usize,
    fs: f64,
    imf_count: usize,
    max_relative_error: f64,
    sift: Vec<SiftReport>,
}

pub fn cmd_decompose(s: &Settings) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new("decompose", s);
    let records = load_records(s)?;
    let record = single(&records, "input record")?;
    let sift = s.sift();
    let d = decompose(&record.clean, &sift)?;
    let dir = prepare_outdir(s)?;
    manifest.inputs.push(record.source.clone());

    for (i, imf) in d.imfs().iter().enumerate() {
        let name = format!("imf_{:02}.csv", i + 1);
        write_series(dir.join(&name), imf)?;
        manifest.outputs.push(name);
    }
    write_series(dir.join("residue.csv"), d.residue())?;
    manifest.outputs.push("residue.csv".into());

    let report = ReconstructionReport {
        record: record.id.clone(),
        samples: record.clean.len(),
        fs: record.clean.fs(),
        imf_count: d.count(),
        max_relative_error: d.reconstruction_error(&record.clean),
        sift: d
            .sift_stats()
            .iter()
            .enumerate()
            .map(|(i, st)| SiftReport {
                imf: i + 1,
                iterations: st.iterations,
                cap_hit: st.cap_hit,
            })
            .collect(),
    };
    write_json(&dir, "reconstruction.json", &report, &mut manifest)?;

    if s.plot {
        let fs = record.clean.fs();
        let names: Vec<String> = (1..=d.count()).map(|k| format!("IMF {k}")).collect();
        let mut rows: Vec<(&str, Vec<Series>)> = vec![("input", vec![Series::sampled("input", record.clean.samples(), fs)])];
        for (name, imf) in names.iter().zip(d.imfs()) {
            rows.push((name, vec![Series::sampled(name, imf.samples(), fs)]));
        }
        rows.push(("residue", vec![Series::sampled("residue", d.residue().samples(), fs)]));
        let panels: Vec<(&str, &[Series])> = rows.iter().map(|(n, s)| (*n, s.as_slice())).collect();
        let svg = plot::stacked(&format!("EMD of {}", record.id), "time (s)", &panels, false);
        write_text(&dir, "decompose.svg", &svg, &mut manifest)?;
    }
    manifest.write(&dir)?;
    println!(
        "{}: {} IMFs, max relative reconstruction error {:.3e}",
        record.id, report.imf_count, report.max_relative_error
    );
    Ok(manifest)
}

pub fn cmd_denoise(s: &Settings) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new("denoise", s);
    let records = load_records(s)?;
    let record = single(&records, "input record")?;
    let kind = *single(s.pipeline.as_deref().unwrap_or_default(), "--pipeline")?;
    let snr_db = *single(s.snr_in.as_deref().unwrap_or(&[10.0]), "--snr-in")?;
    let kinds = s.noises.clone().unwrap_or_else(|| NoiseKind::ALL.to_vec());
    check_references(kind, &kinds)?;
    let config = s.pipeline_config(kind)?;
    let seed = if uses_randomness(&kinds, s)? { s.seed } else { s.seed.or(Some(0)) };
    let noises = noise_specs(&kinds, s, &record.clean, seed)?;
    let noisy = mix(&record.clean, &noises, snr_db, &s.reference())?.with_id(record.id.clone(), seed.unwrap_or(0));

    manifest.inputs.push(record.source.clone());
    manifest.pipelines.push(config.clone());
    manifest.seeds.extend(seed);
    let dir = prepare_outdir(s)?;
    let run = run_pipeline(&noisy, &config)?;

    for (name, series) in [("clean.csv", &noisy.clean), ("noisy.csv", &noisy.noisy), ("denoised.csv", &run.denoised)] {
        write_series(dir.join(name), series)?;
        manifest.outputs.push(name.into());
    }
    write_results(dir.join("results.csv"), std::slice::from_ref(&run.result))?;
    manifest.outputs.push("results.csv".into());
    if s.plot {
        let fs = noisy.clean.fs();
        let svg = plot::chart(
            &format!("{} on {} at {snr_db} dB", kind, record.id),
            "time (s)",
            "amplitude",
            &[
                Series::sampled("noisy", noisy.noisy.samples(), fs),
                Series::sampled("clean", noisy.clean.samples(), fs),
                Series::sampled("denoised", run.denoised.samples(), fs),
            ],
            false,
        );
        write_text(&dir, "denoise.svg", &svg, &mut manifest)?;
    }
    manifest.write(&dir)?;
    let r = &run.result;
    println!(
        "{} {}: snr_in {:.3} dB, snr_out {:.3} dB, improvement {:.3} dB, rmse {:.4e}",
        r.record, r.pipeline, r.snr_in_db, r.snr_out_db, r.snr_imp_db, r.rmse
    );
    Ok(manifest)
}

/// Sort key of a sweep row: record, pipeline, SNR, trial (all as list positions).
type RowKey = (usize, usize, usize, usize);

pub fn cmd_sweep(s: &Settings) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new("sweep", s);
    let records = load_records(s)?;
    let pipelines = s.pipeline.clone().unwrap_or_else(|| PipelineKind::MULTI_NOISE.to_vec());
    let snrs = s.snr_in.clone().unwrap_or_else(|| DEFAULT_SWEEP_SNR.to_vec());
    let trials = s.trials.unwrap_or(DEFAULT_TRIALS);
    let kinds = s.noises.clone().unwrap_or_else(|| NoiseKind::ALL.to_vec());
    if pipelines.is_empty() || snrs.is_empty() || trials == 0 {
        return Err(CliError::config("sweep needs at least one pipeline, one SNR and one trial"));
    }
    let configs = pipelines
        .iter()
        .map(|&k| {
            check_references(k, &kinds)?;
            s.pipeline_config(k)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let base_seed = match (uses_randomness(&kinds, s)?, s.seed) {
        (_, Some(seed)) => seed,
        (false, None) => 0,
        (true, None) => return Err(CliError::config("--seed is required: sweeps use synthetic noise")),
    };
    let seeds: Vec<u64> = (0..trials as u64).map(|t| base_seed.wrapping_add(t)).collect();
    let reference = s.reference();

    manifest.inputs = records.iter().map(|r| r.source.clone()).collect();
    manifest.pipelines = configs.clone();
    manifest.seeds = seeds.clone();
    let dir = prepare_outdir(s)?;

    let jobs: Vec<(usize, usize, usize)> = (0..records.len())
        .flat_map(|r| (0..snrs.len()).flat_map(move |k| (0..trials).map(move |t| (r, k, t))))
        .collect();
    let work = |&(r, k, t): &(usize, usize, usize)| -> Vec<(RowKey, Result<ExperimentResult, CliError>)> {
        let rec = &records[r];
        let noisy: Result<NoisyRecord, CliError> = noise_specs(&kinds, s, &rec.clean, Some(seeds[t]))
            .and_then(|n| Ok(mix(&rec.clean, &n, snrs[k], &reference)?.with_id(rec.id.clone(), seeds[t])));
        match noisy {
            Ok(noisy) => configs
                .iter()
                .enumerate()
                .map(|(p, cfg)| ((r, p, k, t), run_pipeline(&noisy, cfg).map(|run| run.result).map_err(CliError::from)))
                .collect(),
            Err(e) => vec![((r, 0, k, t), Err(e))],
        }
    };
    let threads = s.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut outcomes: Vec<(RowKey, Result<ExperimentResult, CliError>)> =
        pool.install(|| jobs.par_iter().flat_map_iter(work).collect());
    outcomes.sort_by_key(|(key, _)| *key);

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut keyed = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for (key, outcome) in outcomes {
        match outcome {
            Ok(row) => {
                keyed.push((key, row.clone()));
                rows.push(row);
            }
            Err(e) if failure.is_none() => failure = Some(e),
            Err(_) => {}
        }
    }

    // partial results are kept even when some runs failed
    write_results(dir.join("results.csv"), &rows)?;
    manifest.outputs.push("results.csv".into());
    let summary = summarize(&keyed, &pipelines, &snrs, |_| 0);
    write_text(&dir, "summary.csv", &summary_csv(&summary, &pipelines, &snrs, None), &mut manifest)?;
    let per_record = summarize(&keyed, &pipelines, &snrs, |k| k.0);
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    write_text(&dir, "per_record.csv", &summary_csv(&per_record, &pipelines, &snrs, Some(&ids)), &mut manifest)?;
    if s.plot {
        let curves: Vec<Series> = pipelines
            .iter()
            .enumerate()
            .map(|(p, kind)| Series {
                name: kind.as_str(),
                points: (0..snrs.len())
                    .filter_map(|k| summary.get(&(0, p, k)).map(|g| (snrs[k], g.mean_imp)))
                    .collect(),
            })
            .collect();
        let svg = plot::chart("SNR improvement vs input SNR", "SNR_in (dB)", "mean SNR_imp (dB)", &curves, true);
        write_text(&dir, "sweep.svg", &svg, &mut manifest)?;
    }
    manifest.write(&dir)?;

    if let Some(e) = failure {
        return Err(e);
    }
    println!("pipeline,snr_in_db,runs,mean_snr_imp_db,std_snr_imp_db");
    for ((_, p, k), g) in &summary {
        println!("{},{},{},{:.4},{:.4}", pipelines[*p], snrs[*k], g.runs, g.mean_imp, g.std_imp);
    }
    Ok(manifest)
}

struct Group {
    runs: usize,
    mean_imp: f64,
    std_imp: f64,
    mean_out: f64,
    mean_rmse: f64,
}

/// Mean / sample std per (group, pipeline, SNR), with `group` picked from the row key.
fn summarize(
    rows: &[(RowKey, ExperimentResult)],
    pipelines: &[PipelineKind],
    snrs: &[f64],
    group: impl Fn(&RowKey) -> usize,
) -> BTreeMap<(usize, usize, usize), Group> {
    let mut buckets: BTreeMap<(usize, usize, usize), Vec<&ExperimentResult>> = BTreeMap::new();
    for (key, row) in rows {
        debug_assert!(key.1 < pipelines.len() && key.2 < snrs.len());
        buckets.entry((group(key), key.1, key.2)).or_default().push(row);
    }
    buckets
        .into_iter()
        .map(|(key, rows)| {
            let n = rows.len() as f64;
            let mean = |f: fn(&ExperimentResult) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_imp = mean(|r| r.snr_imp_db);
            let var = if rows.len() > 1 {
                rows.iter().map(|r| (r.snr_imp_db - mean_imp).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let g = Group {
                runs: rows.len(),
                mean_imp,
                std_imp: var.sqrt(),
                mean_out: mean(|r| r.snr_out_db),
                mean_rmse: mean(|r| r.rmse),
            };
            (key, g)
        })
        .collect()
}

fn summary_csv(
    groups: &BTreeMap<(usize, usize, usize), Group>,
    pipelines: &[PipelineKind],
    snrs: &[f64],
    records: Option<&[&str]>,
) -> String {
    let mut out = String::new();
    if records.is_some() {
        out.push_str("record,");
    }
    out.push_str("pipeline,snr_in_db,runs,mean_snr_imp_db,std_snr_imp_db,mean_snr_out_db,mean_rmse\n");
    for ((r, p, k), g) in groups {
        if let Some(ids) = records {
            out.push_str(ids[*r]);
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            pipelines[*p],
            fmt_f64(snrs[*k]),
            g.runs,
            fmt_f64(g.mean_imp),
            fmt_f64(g.std_imp),
            fmt_f64(g.mean_out),
            fmt_f64(g.mean_rmse)
        ));
    }
    out
}

#[derive(Serialize)]
struct SelectionReport {
    record: String,
    noise: NoiseKind,
    snr_in_db: f64,
    imf_count: usize,
    best: Candidate,
    best_snr_imp_db: f64,
    /// 60 Hz bin magnitude of each IMF (PLI studies only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pli_bin_magnitudes: Option<Vec<f64>>,
}

pub fn cmd_select(s: &Settings) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new("select", s);
    let records = load_records(s)?;
    let record = single(&records, "input record")?;
    let kind = *single(s.noises.as_deref().unwrap_or_default(), "--noises (one kind)")?;
    let snr_db = *single(s.snr_in.as_deref().unwrap_or(&[10.0]), "--snr-in")?;
    let seed = if uses_randomness(&[kind], s)? { s.seed } else { s.seed.or(Some(0)) };
    let noise = noise_specs(&[kind], s, &record.clean, seed)?.remove(0);
    let setup = SelectionSetup {
        snr_db,
        reference: s.reference(),
        filter: s.filter(),
        sift: s.sift(),
        skip_samples: s.skip_samples.unwrap_or(0),
    };
    let out = select_imf_combination(&record.clean, &noise, &setup)?;

    manifest.inputs.push(record.source.clone());
    manifest.seeds.extend(seed);
    let dir = prepare_outdir(s)?;
    let mut table = String::from("candidate,lo,hi,snr_imp_db\n");
    for row in &out.table {
        let (lo, hi) = match row.candidate {
            Candidate::Range { lo, hi } => (lo.to_string(), hi.to_string()),
            Candidate::WholeSignal => (String::new(), String::new()),
        };
        table.push_str(&format!("{},{lo},{hi},{}\n", row.candidate, fmt_f64(row.snr_imp_db)));
    }
    write_text(&dir, "candidates.csv", &table, &mut manifest)?;

    let pli_bin_magnitudes = match (kind, &noise.source) {
        (NoiseKind::Pli, ecg_anc::noise::NoiseSource::Sinusoid(p)) => Some(
            out.decomposition
                .imfs()
                .iter()
                .map(|imf| bin_magnitude(imf, p.freq))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let best_snr_imp_db = out
        .table
        .iter()
        .find(|c| c.candidate == out.best)
        .map(|c| c.snr_imp_db)
        .unwrap_or(f64::NAN);
    let report = SelectionReport {
        record: record.id.clone(),
        noise: kind,
        snr_in_db: snr_db,
        imf_count: out.imf_count,
        best: out.best,
        best_snr_imp_db,
        pli_bin_magnitudes,
    };
    write_json(&dir, "selection.json", &report, &mut manifest)?;
    manifest.write(&dir)?;
    println!(
        "{} on {}: {} IMFs, best {} ({:.3} dB)",
        kind, record.id, out.imf_count, out.best, best_snr_imp_db
    );
    Ok(manifest)
}
