use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ecg_anc::dataio::wfdb::encode_212;
use ecg_anc::dataio::{read_csv, read_results, write_series, Column};
use ecg_anc::TimeSeries;
use ecg_anc_cli::RunManifest;

fn ecg_anc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecg-anc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ecg_anc(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn denoise_pdaf_improves_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "denoise", "--synthetic-ecg", "--pipeline", "pdaf", "--noises", "bw,pli,em,ma", "--snr-in", "10", "--seed", "1",
        "--outdir", p(&out), "--plot",
    ]);
    for f in ["clean.csv", "noisy.csv", "denoised.csv", "results.csv", "manifest.json", "denoise.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rows = read_results(out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].snr_imp_db > 0.0);
    assert!((rows[0].snr_in_db - 10.0).abs() < 1e-9);
    let manifest = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "denoise");
    assert_eq!(manifest.seeds, vec![1]);
    assert!(manifest.outputs.contains(&"denoised.csv".to_string()));
}

#[test]
fn bwpli_protocol_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["denoise", "--synthetic-ecg", "--pipeline", "bwpli", "--noises", "bw,pli", "--snr-in", "10", "--seed", "2", "--outdir", p(dir.path())]);
    assert!(read_results(dir.path().join("results.csv")).unwrap()[0].snr_imp_db > 0.0);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let seaf = ecg_anc(&["denoise", "--synthetic-ecg", "--pipeline", "seaf", "--noises", "bw,pli,em", "--seed", "1", "--outdir", p(dir.path())]);
    assert_eq!(seaf.status.code(), Some(2));
    assert!(stderr(&seaf).contains("MA"));

    let missing = dir.path().join("nowhere").join("ecg.csv");
    let out = ecg_anc(&["decompose", "--input", p(&missing), "--fs", "360", "--outdir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(p(&missing)));

    let unseeded = ecg_anc(&["denoise", "--synthetic-ecg", "--pipeline", "pdaf", "--noises", "em", "--outdir", p(dir.path())]);
    assert_eq!(unseeded.status.code(), Some(2));
    assert!(stderr(&unseeded).contains("--seed"));

    let bad_flag = ecg_anc(&["denoise", "--synthetic-ecg", "--algo", "kalman"]);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_naming_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecg_anc(&[
        "denoise", "--synthetic-ecg", "--pipeline", "sdaf", "--noises", "bw,pli,em,ma", "--seed", "1", "--mu", "1e9",
        "--outdir", p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("stage `bw`"), "{}", stderr(&out));
}

#[test]
fn decompose_writes_imfs_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tones.csv");
    let x = TimeSeries::from_fn(1024, 250.0, |i| {
        let t = i as f64 / 250.0;
        (std::f64::consts::TAU * 3.0 * t).sin() + 0.4 * (std::f64::consts::TAU * 40.0 * t).sin()
    })
    .unwrap();
    write_series(&input, &x).unwrap();
    let out = dir.path().join("emd");
    ok(&["decompose", "--input", p(&input), "--outdir", p(&out), "--plot"]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("reconstruction.json")).unwrap()).unwrap();
    let k = report["imf_count"].as_u64().unwrap() as usize;
    assert!(k >= 2);
    assert!(report["max_relative_error"].as_f64().unwrap() <= 1e-8);
    let mut sum = read_csv(out.join("residue.csv"), &Column::Index(0), None).unwrap().into_samples();
    for i in 1..=k {
        let imf = read_csv(out.join(format!("imf_{i:02}.csv")), &Column::Name("value".into()), None).unwrap();
        for (s, v) in sum.iter_mut().zip(imf.samples()) {
            *s += v;
        }
    }
    for (s, v) in sum.iter().zip(x.samples()) {
        assert!((s - v).abs() <= 1e-8);
    }
    assert!(out.join("decompose.svg").exists());
}

#[test]
fn decompose_of_monotonic_input_has_no_imfs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ramp.csv");
    fs::write(&input, "# fs=100\n0\n0.5\n1\n1.5\n2\n4\n").unwrap();
    ok(&["decompose", "--input", p(&input), "--outdir", p(dir.path())]);
    assert!(!dir.path().join("imf_01.csv").exists());
    let residue = read_csv(dir.path().join("residue.csv"), &Column::Index(0), None).unwrap();
    assert_eq!(residue.samples(), &[0.0, 0.5, 1.0, 1.5, 2.0, 4.0]);
}

#[test]
fn sweep_is_factorial_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |out: &Path, jobs: &str| {
        ok(&["sweep", "--synthetic-ecg", "--pipeline", "sdaf,pdaf,seaf,peaf", "--snr-in", "5,10,15", "--trials", "5",
             "--seed", "11", "--jobs", jobs, "--outdir", p(out), "--plot"]);
    };
    args(&a, "3");
    args(&b, "1");
    let ra = read_results(a.join("results.csv")).unwrap();
    let rb = read_results(b.join("results.csv")).unwrap();
    assert_eq!(ra.len(), 60);
    let strip = |rows: &[ecg_anc::pipelines::ExperimentResult]| rows.iter().map(|r| r.without_timing()).collect::<Vec<_>>();
    assert_eq!(strip(&ra), strip(&rb));
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4 * 3);
    assert!(a.join("sweep.svg").exists() && a.join("per_record.csv").exists());
}

#[test]
fn sweep_flushes_partial_results_before_failing() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(&config, "[stages.combined]\nalgo = \"nlms\"\nmu = 1e9\neps = 1e-300\n").unwrap();
    let out = ecg_anc(&[
        "sweep", "--synthetic-ecg", "--pipeline", "sdaf,pdaf", "--snr-in", "10", "--trials", "2", "--seed", "3",
        "--config", p(&config), "--outdir", p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("combined"));
    let rows = read_results(dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.pipeline.as_str() == "sdaf"));
}

#[test]
fn manifest_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&["denoise", "--synthetic-ecg", "--duration", "4", "--pipeline", "peaf", "--seed", "5", "--taps", "16", "--outdir", p(&first)]);
    let again = dir.path().join("again");
    ok(&["denoise", "--config", p(&first.join("manifest.json")), "--outdir", p(&again)]);
    for f in ["clean.csv", "noisy.csv", "denoised.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_fills_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "synthetic-ecg = true\nduration = 3\npipeline = [\"pdaf\"]\nnoises = [\"pli\"]\ntaps = 2\nmu = 0.5\n").unwrap();
    ok(&["denoise", "--config", p(&config), "--mu", "0.05", "--outdir", p(dir.path())]);
    let manifest = RunManifest::read(&dir.path().join("manifest.json")).unwrap();
    let spec = manifest.pipelines[0].stages.values().next().unwrap();
    assert_eq!((spec.taps, spec.mu), (2, 0.05));
    assert_eq!(read_csv(dir.path().join("clean.csv"), &Column::Index(0), None).unwrap().len(), 1080);
}

#[test]
fn wfdb_and_recorded_noise_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let n = 1440;
    let adc: Vec<i16> = (0..n)
        .map(|i| {
            let t = i as f64 / 360.0;
            (200.0 * (std::f64::consts::TAU * 1.2 * t).sin() + 60.0 * (std::f64::consts::TAU * 9.0 * t).sin()) as i16
        })
        .collect();
    fs::write(dir.path().join("r1.dat"), encode_212(&adc)).unwrap();
    fs::write(dir.path().join("r1.hea"), format!("r1 1 360 {n}\nr1.dat 212 200 11 0 0 0 0 MLII\n")).unwrap();
    let noise = TimeSeries::from_fn(2000, 360.0, |i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).unwrap();
    write_series(dir.path().join("ma.csv"), &noise).unwrap();
    let ma_arg = format!("ma={}", p(&dir.path().join("ma.csv")));
    let out = dir.path().join("out");
    ok(&[
        "denoise", "--input", p(&dir.path().join("r1.hea")), "--pipeline", "pdaf", "--noises", "pli,ma",
        "--noise-file", &ma_arg, "--outdir", p(&out),
    ]);
    let rows = read_results(out.join("results.csv")).unwrap();
    assert_eq!(rows[0].record, "r1");
    let manifest = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.seeds, vec![0]);
}

#[test]
fn select_writes_a_complete_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["select", "--synthetic-ecg", "--noises", "pli", "--step-mode", "ref-power", "--outdir", p(dir.path())]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("selection.json")).unwrap()).unwrap();
    let k = report["imf_count"].as_u64().unwrap() as usize;
    let table = fs::read_to_string(dir.path().join("candidates.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + k * (k + 1) / 2 + 1);
    assert_eq!(report["best"], "1..1");
    assert_eq!(report["pli_bin_magnitudes"].as_array().unwrap().len(), k);

    let two = ecg_anc(&["select", "--synthetic-ecg", "--noises", "pli,bw", "--seed", "1", "--outdir", p(dir.path())]);
    assert_eq!(two.status.code(), Some(2));
}
