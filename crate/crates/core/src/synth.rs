//! Seeded coupled spike-train fixtures.
//!
//! Channel 1 is the master: an i.i.d. Bernoulli train at `base_rate`. Inside
//! the coupled segment each follower copies every master peak with
//! probability `coupling`, displaced by a rounded `N(0, jitter_std)` lag and
//! clipped to the record, and adds its own independent peaks at
//! `base_rate * (1 - coupling)` so the overall rate stays near `base_rate`.
//! Outside the segment followers are independent at `base_rate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MultiChannelRecord;
use crate::peaks::PeakTrain;

pub const SPIKE_AMPLITUDE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Emit {
    Trains,
    Raw { sample_rate_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub r: usize,
    pub n: usize,
    pub base_rate: f64,
    pub coupling: f64,
    pub jitter_std: f64,
    /// Half-open `start..end`; coupling applies everywhere when `None`.
    pub segment: Option<(usize, usize)>,
    pub seed: u64,
    pub emit: Emit,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 || self.n < 1 {
            return Err(Error::validation(
                "need at least one channel and one sample",
            ));
        }
        if !(self.base_rate > 0.0 && self.base_rate < 0.5) {
            return Err(Error::validation(format!(
                "base rate must lie in (0, 0.5), got {}",
                self.base_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::validation(format!(
                "coupling must lie in [0, 1], got {}",
                self.coupling
            )));
        }
        if !(self.jitter_std.is_finite() && self.jitter_std >= 0.0) {
            return Err(Error::validation("jitter must be non-negative"));
        }
        if let Some((s, e)) = self.segment {
            if s >= e || e > self.n {
                return Err(Error::validation(format!(
                    "segment {s}..{e} outside 0..{}",
                    self.n
                )));
            }
        }
        if let Emit::Raw { sample_rate_hz } = self.emit {
            if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
                return Err(Error::validation("sample rate must be positive"));
            }
        }
        Ok(())
    }

    fn coupled(&self, t: usize) -> bool {
        self.segment.is_none_or(|(s, e)| (s..e).contains(&t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthOutput {
    Trains(Vec<PeakTrain>),
    Raw(MultiChannelRecord),
}

pub fn channel_label(k: usize) -> String {
    format!("ch{}", k + 1)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = trains_with(spec, &mut rng)?;
    match spec.emit {
        Emit::Trains => Ok(SynthOutput::Trains(
            rows.into_iter()
                .enumerate()
                .map(|(k, v)| PeakTrain::new(channel_label(k), v))
                .collect::<Result<_>>()?,
        )),
        Emit::Raw { sample_rate_hz } => {
            let samples = rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&p| {
                            let noise: f64 = StandardNormal.sample(&mut rng);
                            noise + SPIKE_AMPLITUDE * f64::from(p)
                        })
                        .collect()
                })
                .collect();
            let labels = (0..spec.r).map(channel_label).collect();
            Ok(SynthOutput::Raw(MultiChannelRecord::new(
                labels,
                samples,
                sample_rate_hz,
            )?))
        }
    }
}

/// Shorthand for `emit = Trains`.
pub fn generate_trains(spec: &SynthSpec) -> Result<Vec<PeakTrain>> {
    match generate(&SynthSpec {
        emit: Emit::Trains,
        ..spec.clone()
    })? {
        SynthOutput::Trains(t) => Ok(t),
        SynthOutput::Raw(_) => unreachable!(),
    }
}

pub fn generate_raw(spec: &SynthSpec, sample_rate_hz: f64) -> Result<MultiChannelRecord> {
    match generate(&SynthSpec {
        emit: Emit::Raw { sample_rate_hz },
        ..spec.clone()
    })? {
        SynthOutput::Raw(r) => Ok(r),
        SynthOutput::Trains(_) => unreachable!(),
    }
}

fn trains_with(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<u8>>> {
    let n = spec.n;
    let master: Vec<u8> = (0..n)
        .map(|_| rng.random_bool(spec.base_rate) as u8)
        .collect();
    let lag = if spec.jitter_std > 0.0 {
        Some(Normal::new(0.0, spec.jitter_std).map_err(|e| Error::validation(e.to_string()))?)
    } else {
        None
    };
    let residual_rate = spec.base_rate * (1.0 - spec.coupling);

    let mut rows = vec![master.clone()];
    for _ in 1..spec.r {
        let mut row = vec![0u8; n];
        for t in 0..n {
            let coupled = spec.coupled(t);
            let own_rate = if coupled {
                residual_rate
            } else {
                spec.base_rate
            };
            if rng.random_bool(own_rate) {
                row[t] = 1;
            }
            if coupled && master[t] == 1 && rng.random_bool(spec.coupling) {
                let shift = lag.map_or(0.0, |d| d.sample(rng).round());
                let dest = (t as f64 + shift).clamp(0.0, (n - 1) as f64) as usize;
                row[dest] = 1;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(coupling: f64, jitter: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            r: 3,
            n: 20_000,
            base_rate: 0.01,
            coupling,
            jitter_std: jitter,
            segment: None,
            seed,
            emit: Emit::Trains,
        }
    }

    #[test]
    fn full_coupling_without_jitter_copies_master() {
        let t = generate_trains(&spec(1.0, 0.0, 1)).unwrap();
        assert_eq!(t[0].indicators(), t[1].indicators());
        assert_eq!(t[0].indicators(), t[2].indicators());
        assert_eq!(t[2].label(), "ch3");
    }

    #[test]
    fn deterministic_for_seed() {
        let s = SynthSpec {
            emit: Emit::Raw {
                sample_rate_hz: 256.0,
            },
            segment: Some((5000, 9000)),
            ..spec(0.9, 1.0, 77)
        };
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = SynthSpec {
            seed: 78,
            ..s.clone()
        };
        assert_ne!(generate(&s).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn independent_coincidence_rate() {
        let s = SynthSpec {
            n: 100_000,
            ..spec(0.0, 0.0, 5)
        };
        let t = generate_trains(&s).unwrap();
        let p = s.base_rate;
        let q = p * p;
        let se = (q * (1.0 - q) / s.n as f64).sqrt();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let hits = t[i]
                .indicators()
                .iter()
                .zip(t[j].indicators())
                .filter(|(a, b)| **a == 1 && **b == 1)
                .count();
            let rate = hits as f64 / s.n as f64;
            assert!((rate - q).abs() <= 3.0 * se, "pair {i},{j}: {rate}");
        }
        for tr in &t {
            let expect = s.n as f64 * p;
            let se = (s.n as f64 * p * (1.0 - p)).sqrt();
            assert!((tr.count() as f64 - expect).abs() <= 5.0 * se);
        }
    }

    #[test]
    fn raw_embeds_spikes() {
        let s = SynthSpec {
            n: 2000,
            ..spec(1.0, 0.0, 3)
        };
        let trains = generate_trains(&s).unwrap();
        let raw = generate_raw(&s, 256.0).unwrap();
        assert_eq!(raw.n_channels(), 3);
        let idx = trains[0].peak_indices();
        let mean_at: f64 = idx.iter().map(|&i| raw.channel(0)[i]).sum::<f64>() / idx.len() as f64;
        assert!((mean_at - SPIKE_AMPLITUDE).abs() < 1.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&SynthSpec {
            base_rate: 0.6,
            ..spec(0.0, 0.0, 1)
        })
        .is_err());
        assert!(generate(&SynthSpec {
            coupling: 1.5,
            ..spec(0.0, 0.0, 1)
        })
        .is_err());
        assert!(generate(&SynthSpec {
            segment: Some((10, 5)),
            ..spec(0.0, 0.0, 1)
        })
        .is_err());
        assert!(generate(&SynthSpec {
            jitter_std: -1.0,
            ..spec(0.0, 0.0, 1)
        })
        .is_err());
    }
}
