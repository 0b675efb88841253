//! Sliding-window amplitude-threshold peak detection.
//!
//! A sample is a peak when it is a strict local maximum (for a flat top, the
//! first sample of the run) and its value exceeds `median + k * std` of the
//! tumbling window it falls in. `std` is the population standard deviation.
//! Samples past the last full window reuse that window's threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MultiChannelRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Positive,
    Negative,
    Both,
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "both" => Ok(Polarity::Both),
            other => Err(Error::validation(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window_len: usize,
    pub multiplier: f64,
    pub polarity: Polarity,
}

impl DetectorConfig {
    /// One-second windows, threshold factor 2, upward peaks.
    pub fn for_sample_rate(sample_rate_hz: f64) -> Self {
        Self {
            window_len: (sample_rate_hz.round() as usize).max(3),
            multiplier: 2.0,
            polarity: Polarity::Positive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 3 {
            return Err(Error::validation(format!(
                "window_len must be >= 3, got {}",
                self.window_len
            )));
        }
        if !(self.multiplier.is_finite() && self.multiplier > 0.0) {
            return Err(Error::validation(format!(
                "multiplier must be positive, got {}",
                self.multiplier
            )));
        }
        Ok(())
    }
}

/// Binary event sequence for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakTrain {
    label: String,
    indicators: Vec<u8>,
}

impl PeakTrain {
    pub fn new(label: impl Into<String>, indicators: Vec<u8>) -> Result<Self> {
        if let Some(i) = indicators.iter().position(|&v| v > 1) {
            return Err(Error::validation(format!(
                "peak train value {} at index {i} is not 0 or 1",
                indicators[i]
            )));
        }
        Ok(Self {
            label: label.into(),
            indicators,
        })
    }

    /// Train with ones at the given indices.
    pub fn from_indices(label: impl Into<String>, len: usize, indices: &[usize]) -> Result<Self> {
        let mut v = vec![0u8; len];
        for &i in indices {
            if i >= len {
                return Err(Error::validation(format!(
                    "peak index {i} out of range {len}"
                )));
            }
            v[i] = 1;
        }
        Self::new(label, v)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn indicators(&self) -> &[u8] {
        &self.indicators
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn count(&self) -> usize {
        self.indicators.iter().map(|&v| v as usize).sum()
    }

    pub fn peak_indices(&self) -> Vec<usize> {
        self.indicators
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v == 1).then_some(i))
            .collect()
    }

    /// Copy restricted to `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            label: self.label.clone(),
            indicators: self.indicators[start..end].to_vec(),
        }
    }
}

pub fn detect_peaks(channel: &[f64], cfg: &DetectorConfig) -> Result<PeakTrain> {
    cfg.validate()?;
    if channel.len() < cfg.window_len {
        return Err(Error::validation(format!(
            "channel has {} samples, shorter than window {}",
            channel.len(),
            cfg.window_len
        )));
    }
    if let Some(i) = channel.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite sample at index {i}")));
    }
    let indicators = match cfg.polarity {
        Polarity::Positive => detect_upward(channel, cfg),
        Polarity::Negative => detect_upward(&negated(channel), cfg),
        Polarity::Both => {
            let up = detect_upward(channel, cfg);
            let down = detect_upward(&negated(channel), cfg);
            up.iter().zip(&down).map(|(a, b)| a | b).collect()
        }
    };
    PeakTrain::new("", indicators)
}

/// Runs the detector on every channel, labelling trains by channel.
pub fn detect_record(record: &MultiChannelRecord, cfg: &DetectorConfig) -> Result<Vec<PeakTrain>> {
    use rayon::prelude::*;
    record
        .labels()
        .par_iter()
        .zip(record.channels())
        .map(|(label, x)| {
            detect_peaks(x, cfg).map(|t| PeakTrain {
                label: label.clone(),
                ..t
            })
        })
        .collect()
}

fn negated(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

fn detect_upward(x: &[f64], cfg: &DetectorConfig) -> Vec<u8> {
    let thresholds = window_thresholds(x, cfg.window_len, cfg.multiplier);
    let last = thresholds.len() - 1;
    let threshold_at = |t: usize| thresholds[(t / cfg.window_len).min(last)];

    let n = x.len();
    let mut out = vec![0u8; n];
    let mut t = 1;
    while t + 1 < n {
        if x[t] > x[t - 1] {
            // walk across a flat top
            let mut u = t + 1;
            while u < n && x[u] == x[t] {
                u += 1;
            }
            if u < n && x[u] < x[t] && x[t] > threshold_at(t) {
                out[t] = 1;
            }
            t = u;
        } else {
            t += 1;
        }
    }
    out
}

/// `median + k * std` for each full tumbling window.
fn window_thresholds(x: &[f64], window_len: usize, k: f64) -> Vec<f64> {
    let mut buf = Vec::with_capacity(window_len);
    x.chunks_exact(window_len)
        .map(|w| {
            buf.clear();
            buf.extend_from_slice(w);
            median_in_place(&mut buf) + k * population_std(w)
        })
        .collect()
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (left, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

pub(crate) fn population_std(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}
