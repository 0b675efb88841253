//! Multichannel record type and its on-disk formats.
//!
//! CSV layout: one header row of unique channel labels, then one row per time
//! sample with one column per channel. A leading column named `time` is
//! accepted and dropped. The sample rate never lives in the file.
//!
//! Binary layout (little endian): magic `PSYN`, `u32` channel count, `u32`
//! sample count, `u32` reserved (zero), then `r * N` `f64` values, row-major
//! (all of channel 0, then channel 1, ...). Binary files carry no labels;
//! channels are named `ch1..chR` on read.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"PSYN";
const BINARY_HEADER_LEN: usize = 16;

/// Raw sampled signals, `r` channels by `N` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRecord {
    labels: Vec<String>,
    samples: Vec<Vec<f64>>,
    sample_rate_hz: f64,
}

impl MultiChannelRecord {
    pub fn new(labels: Vec<String>, samples: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("record has zero channels"));
        }
        if labels.len() != samples.len() {
            return Err(Error::validation(format!(
                "{} labels for {} channels",
                labels.len(),
                samples.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::validation("empty channel label"));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate channel label `{label}`"
                )));
            }
        }
        let n = samples[0].len();
        if n == 0 {
            return Err(Error::validation("record has zero samples"));
        }
        for (label, row) in labels.iter().zip(&samples) {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "channel `{label}` has {} samples, expected {n}",
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "channel `{label}` has a non-finite sample at index {i}"
                )));
            }
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            labels,
            samples,
            sample_rate_hz,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index]
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples[0].len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Sub-record holding the named channels, in the order given.
    pub fn select(&self, group: &[impl AsRef<str>]) -> Result<Self> {
        let mut labels = Vec::with_capacity(group.len());
        let mut samples = Vec::with_capacity(group.len());
        for name in group {
            let name = name.as_ref();
            let idx = self
                .index_of(name)
                .ok_or_else(|| Error::validation(format!("unknown channel label `{name}`")))?;
            labels.push(self.labels[idx].clone());
            samples.push(self.samples[idx].clone());
        }
        Self::new(labels, samples, self.sample_rate_hz)
    }

    /// Same labels and rate, new sample rows (validated).
    pub fn with_samples(&self, samples: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.labels.clone(), samples, self.sample_rate_hz)
    }

    pub(crate) fn map_channels<F>(&self, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        use rayon::prelude::*;
        let samples = self.samples.par_iter().map(|row| f(row)).collect();
        Self {
            labels: self.labels.clone(),
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// Reads a record, sniffing the binary magic and falling back to CSV.
pub fn read_record(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<MultiChannelRecord> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes, sample_rate_hz)
    } else {
        parse_csv(&bytes, sample_rate_hz)
    }
}

pub fn parse_csv(data: &[u8], sample_rate_hz: f64) -> Result<MultiChannelRecord> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(data);
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::validation("empty file: no header row")),
    };
    let mut labels: Vec<String> = header.iter().map(str::to_owned).collect();
    let skip_time = labels
        .first()
        .is_some_and(|l| l.eq_ignore_ascii_case("time"));
    let width = labels.len();
    if skip_time {
        labels.remove(0);
    }
    if labels.is_empty() {
        return Err(Error::validation("header has zero channels"));
    }

    let mut samples = vec![Vec::new(); labels.len()];
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line() as usize);
        if row.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} fields, found {}", row.len()),
            ));
        }
        let offset = usize::from(skip_time);
        for (col, cell) in row.iter().skip(offset).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(line, format!("non-numeric cell `{cell}`")))?;
            samples[col].push(v);
        }
    }
    MultiChannelRecord::new(labels, samples, sample_rate_hz)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    Error::parse(line, e.to_string())
}

/// Writes the CSV layout. Values use the shortest round-trip representation,
/// so a subsequent read is bit-exact.
pub fn write_record(path: impl AsRef<Path>, record: &MultiChannelRecord) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", record.labels.join(",")).map_err(io)?;
    let mut line = String::new();
    for t in 0..record.n_samples() {
        line.clear();
        for (k, row) in record.samples.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&row[t].to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn encode_binary(record: &MultiChannelRecord) -> Vec<u8> {
    let r = record.n_channels();
    let n = record.n_samples();
    let mut bytes = Vec::with_capacity(BINARY_HEADER_LEN + 8 * r * n);
    bytes.extend_from_slice(BINARY_MAGIC);
    bytes.extend_from_slice(&(r as u32).to_le_bytes());
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    for row in &record.samples {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn decode_binary(bytes: &[u8], sample_rate_hz: f64) -> Result<MultiChannelRecord> {
    if bytes.len() < BINARY_HEADER_LEN || !bytes.starts_with(BINARY_MAGIC) {
        return Err(Error::parse(None, "missing PSYN binary header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (r, n) = (word(4), word(8));
    let expected = r
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(BINARY_HEADER_LEN))
        .ok_or_else(|| Error::parse(None, "binary header dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::parse(
            None,
            format!(
                "binary payload is {} bytes, header implies {expected}",
                bytes.len()
            ),
        ));
    }
    let mut values = bytes[BINARY_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let samples = (0..r).map(|_| values.by_ref().take(n).collect()).collect();
    let labels = (1..=r).map(|k| format!("ch{k}")).collect();
    MultiChannelRecord::new(labels, samples, sample_rate_hz)
}

pub fn write_binary(path: impl AsRef<Path>, record: &MultiChannelRecord) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_binary(record)).map_err(|e| Error::io(path, e))
}

/// Formats a derived value with 17 significant digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a `t,value` series.
pub fn write_series(path: impl AsRef<Path>, t_index: &[usize], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if t_index.len() != values.len() {
        return Err(Error::validation(format!(
            "series length mismatch: {} indices, {} values",
            t_index.len(),
            values.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "t,value").map_err(io)?;
    for (t, v) in t_index.iter().zip(values) {
        writeln!(out, "{t},{}", fmt_value(*v)).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_series(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<f64>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(None, format!("{other:?}")),
        })?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line() as usize);
        if row.len() != 2 {
            return Err(Error::parse(line, "expected `t,value`"));
        }
        ts.push(
            row[0]
                .parse()
                .map_err(|_| Error::parse(line, "bad index"))?,
        );
        vs.push(
            row[1]
                .parse()
                .map_err(|_| Error::parse(line, "bad value"))?,
        );
    }
    Ok((ts, vs))
}
