//! Plain CSV signals and result tables.
//!
//! Signal files are one or more numeric columns, optionally preceded by a
//! header row and by `#` comment lines; `# fs=<Hz>` declares the sampling
//! rate. Values are written with 17 significant digits so that a write/read
//! cycle reproduces every finite `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipelines::ExperimentResult;
use crate::signal::TimeSeries;

/// Column selector: zero-based index or header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// The sampling rate from a `# fs=<Hz>` comment, if the file has one.
pub fn csv_sample_rate(path: impl AsRef<Path>) -> Result<Option<f64>> {
    header_fs(path.as_ref())
}

fn header_fs(path: &Path) -> Result<Option<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let Some(comment) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        if let Some(value) = comment.trim().strip_prefix("fs=").or_else(|| comment.trim().strip_prefix("fs =")) {
            let fs: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_error(path, i as u64 + 1, format!("bad fs `{}`", value.trim())))?;
            return Ok(Some(fs));
        }
    }
    Ok(None)
}

/// Reads one numeric column. `fs` overrides any `# fs=` header comment.
pub fn read_csv(path: impl AsRef<Path>, column: &Column, fs: Option<f64>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let fs = match fs {
        Some(fs) => fs,
        None => header_fs(path)?.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{}: no sampling rate given and no `# fs=` header",
                path.display()
            ))
        })?,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut index = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut samples = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if first {
            first = false;
            let is_header = record.iter().any(|f| f.parse::<f64>().is_err());
            if is_header {
                if let Column::Name(name) = column {
                    index = Some(
                        record
                            .iter()
                            .position(|f| f == name)
                            .ok_or_else(|| parse_error(path, line, format!("no column named `{name}`")))?,
                    );
                }
                continue;
            }
        }
        let i = index.ok_or_else(|| parse_error(path, line, "column names need a header row"))?;
        let field = record
            .get(i)
            .ok_or_else(|| parse_error(path, line, format!("missing column {i}")))?;
        let v: f64 = field
            .parse()
            .map_err(|_| parse_error(path, line, format!("not a number: `{field}`")))?;
        if !v.is_finite() {
            return Err(parse_error(path, line, format!("non-finite value `{field}`")));
        }
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(parse_error(path, 0, "no samples"));
    }
    TimeSeries::new(samples, fs)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes equally long series as named columns, with a `# fs=` comment.
pub fn write_columns(path: impl AsRef<Path>, columns: &[(&str, &TimeSeries)]) -> Result<()> {
    let path = path.as_ref();
    let first = columns
        .first()
        .ok_or_else(|| Error::InvalidConfig("nothing to write".into()))?
        .1;
    for (_, s) in columns {
        first.check_compatible(s)?;
    }
    let mut out = create(path)?;
    writeln!(out, "# fs={}", first.fs()).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(columns.iter().map(|(name, _)| *name)).map_err(io)?;
    for i in 0..first.len() {
        w.write_record(columns.iter().map(|(_, s)| fmt_f64(s.samples()[i]))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a single series under the column name `value`.
pub fn write_series(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    write_columns(path, &[("value", series)])
}

/// Writes result rows under the fixed header.
pub fn write_results(path: impl AsRef<Path>, rows: &[ExperimentResult]) -> Result<()> {
    let path = path.as_ref();
    let out = create(path)?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(ExperimentResult::CSV_HEADER.split(',')).map_err(io)?;
    for r in rows {
        w.write_record([
            r.record.clone(),
            r.pipeline.to_string(),
            fmt_f64(r.snr_in_db),
            fmt_f64(r.snr_out_db),
            fmt_f64(r.snr_imp_db),
            fmt_f64(r.rmse),
            fmt_f64(r.runtime_ms),
            r.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_results`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ExperimentResult>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 8 {
            return Err(parse_error(path, line, format!("expected 8 fields, found {}", record.len())));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad number `{}`", &record[i])))
        };
        rows.push(ExperimentResult {
            record: record[0].to_string(),
            pipeline: record[1].parse()?,
            snr_in_db: num(2)?,
            snr_out_db: num(3)?,
            snr_imp_db: num(4)?,
            rmse: num(5)?,
            runtime_ms: num(6)?,
            seed: record[7]
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad seed `{}`", &record[7])))?,
        });
    }
    Ok(rows)
}
