//! WFDB records stored in format 212.
//!
//! Header (`.hea`) layout, whitespace separated:
//!
//! ```text
//! <record> <n_signals> <fs>[/<counter>][(<base>)] <n_samples> ...
//! <file> <format> <gain>[(<baseline>)][/<units>] <adc_res> <adc_zero> ...
//! ```
//!
//! Format 212 packs two 12-bit two's-complement samples into three bytes:
//! `s0 = ((b1 & 0x0F) << 8) | b0`, `s1 = ((b1 & 0xF0) << 4) | b2`. Samples of
//! all signals in one file are interleaved frame by frame.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInfo {
    pub file_name: String,
    pub format: u16,
    /// ADC units per physical unit (mV).
    pub gain: f64,
    pub baseline: i32,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub name: String,
    pub fs: f64,
    /// Samples per channel; 0 when the header leaves it unspecified.
    pub samples_per_channel: usize,
    pub channels: Vec<ChannelInfo>,
}

impl RecordHeader {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

const DEFAULT_GAIN: f64 = 200.0;

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parses header text; `path` is only used in error messages.
pub fn parse_header(text: &str, path: &Path) -> Result<RecordHeader> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let record_line = lines.next().ok_or_else(|| malformed(path, "empty header"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(malformed(path, "record line needs a name and a signal count"));
    }
    let name = fields[0].split('/').next().unwrap_or(fields[0]).to_string();
    let nsig: usize = fields[1]
        .parse()
        .map_err(|_| malformed(path, format!("bad signal count `{}`", fields[1])))?;
    if nsig == 0 {
        return Err(malformed(path, "record has no signals"));
    }
    let fs = match fields.get(2) {
        Some(f) => {
            let head = f.split(['/', '(']).next().unwrap_or(f);
            head.parse::<f64>()
                .map_err(|_| malformed(path, format!("bad sampling frequency `{f}`")))?
        }
        None => 250.0,
    };
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(malformed(path, "sampling frequency must be > 0"));
    }
    let samples_per_channel = match fields.get(3) {
        Some(f) => f
            .parse()
            .map_err(|_| malformed(path, format!("bad sample count `{f}`")))?,
        None => 0,
    };

    let mut channels = Vec::with_capacity(nsig);
    for i in 0..nsig {
        let line = lines
            .next()
            .ok_or_else(|| malformed(path, format!("missing signal line {}", i + 1)))?;
        channels.push(parse_signal_line(line, path)?);
    }
    Ok(RecordHeader {
        name,
        fs,
        samples_per_channel,
        channels,
    })
}

fn parse_signal_line(line: &str, path: &Path) -> Result<ChannelInfo> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(malformed(path, format!("signal line `{line}` needs file and format")));
    }
    // format may carry suffixes: 212x2:1+0
    let fmt_digits: String = fields[1].chars().take_while(char::is_ascii_digit).collect();
    let format: u16 = fmt_digits
        .parse()
        .map_err(|_| malformed(path, format!("bad format `{}`", fields[1])))?;

    let adc_zero: i32 = match fields.get(4) {
        Some(z) => z
            .parse()
            .map_err(|_| malformed(path, format!("bad ADC zero `{z}`")))?,
        None => 0,
    };
    let (gain, baseline) = match fields.get(2) {
        Some(g) => parse_gain(g, adc_zero).ok_or_else(|| malformed(path, format!("bad gain `{g}`")))?,
        None => (DEFAULT_GAIN, adc_zero),
    };
    let description = fields.get(8..).map(|d| d.join(" ")).unwrap_or_default();
    Ok(ChannelInfo {
        file_name: fields[0].to_string(),
        format,
        gain,
        baseline,
        description,
    })
}

/// `200`, `200/mV`, `200(1024)/mV`; baseline defaults to the ADC zero.
fn parse_gain(field: &str, adc_zero: i32) -> Option<(f64, i32)> {
    let field = field.split('/').next()?;
    let (gain_str, baseline) = match field.split_once('(') {
        Some((g, rest)) => (g, rest.strip_suffix(')')?.parse().ok()?),
        None => (field, adc_zero),
    };
    let gain: f64 = gain_str.parse().ok()?;
    let gain = if gain == 0.0 { DEFAULT_GAIN } else { gain };
    gain.is_finite().then_some((gain, baseline))
}

fn sign_extend_12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

/// Decodes `count` format-212 samples from `bytes`.
pub fn decode_212(bytes: &[u8], count: usize) -> Option<Vec<i16>> {
    if bytes.len() < bytes_for_212(count) {
        return None;
    }
    let mut out = Vec::with_capacity(count);
    for chunk in bytes.chunks(3) {
        if out.len() == count {
            break;
        }
        let b0 = chunk[0] as u16;
        let b1 = *chunk.get(1)? as u16;
        out.push(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        if out.len() == count {
            break;
        }
        let b2 = *chunk.get(2)? as u16;
        out.push(sign_extend_12(((b1 & 0xF0) << 4) | b2));
    }
    Some(out)
}

/// Packs 12-bit samples (values outside `-2048..=2047` are truncated to 12
/// bits). An odd trailing sample is written as two bytes.
pub fn encode_212(samples: &[i16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes_for_212(samples.len()));
    for pair in samples.chunks(2) {
        let s0 = pair[0] as u16 & 0x0FFF;
        out.push((s0 & 0xFF) as u8);
        match pair.get(1) {
            Some(&s1) => {
                let s1 = s1 as u16 & 0x0FFF;
                out.push(((s0 >> 8) as u8) | (((s1 >> 8) as u8) << 4));
                out.push((s1 & 0xFF) as u8);
            }
            None => out.push((s0 >> 8) as u8),
        }
    }
    out
}

/// Byte length of `count` packed samples.
pub fn bytes_for_212(count: usize) -> usize {
    count / 2 * 3 + if count % 2 == 1 { 2 } else { 0 }
}

/// Converts an ADC value to physical units.
pub fn adc_to_physical(adc: i32, gain: f64, baseline: i32) -> f64 {
    (adc - baseline) as f64 / gain
}

/// Reads a record given its header path; the signal file named in the header
/// is looked up next to it.
pub fn read_record(header_path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_header(&text, header_path)?;
    let file = &header
        .channels
        .first()
        .ok_or_else(|| malformed(header_path, "no signal lines"))?
        .file_name;
    let signal_path = header_path.parent().unwrap_or(Path::new("")).join(file);
    read_wfdb(header_path, signal_path)
}

/// Reads every channel of a format-212 record as physical-unit series.
pub fn read_wfdb(header_path: impl AsRef<Path>, signal_path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    let header_path = header_path.as_ref();
    let signal_path = signal_path.as_ref();
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_header(&text, header_path)?;
    for ch in &header.channels {
        if ch.format != 212 {
            return Err(Error::UnsupportedFormat(ch.format.to_string()));
        }
    }
    if header.channels.iter().any(|c| c.file_name != header.channels[0].file_name) {
        return Err(Error::InvalidConfig(
            "channels split across several signal files are not supported".into(),
        ));
    }
    let bytes = fs::read(signal_path).map_err(|e| Error::io(signal_path, e))?;
    let nsig = header.channel_count();
    let per_channel = if header.samples_per_channel > 0 {
        header.samples_per_channel
    } else {
        bytes.len() * 2 / 3 / nsig
    };
    let total = per_channel * nsig;
    let adc = decode_212(&bytes, total).ok_or_else(|| Error::TruncatedSignal {
        path: PathBuf::from(signal_path),
        expected: bytes_for_212(total),
        found: bytes.len(),
    })?;
    if per_channel == 0 {
        return Err(Error::InvalidSeries(format!("{} holds no samples", signal_path.display())));
    }
    header
        .channels
        .iter()
        .enumerate()
        .map(|(c, info)| {
            let samples = adc
                .iter()
                .skip(c)
                .step_by(nsig)
                .map(|&v| adc_to_physical(v as i32, info.gain, info.baseline))
                .collect();
            TimeSeries::new(samples, header.fs)
        })
        .collect()
}
