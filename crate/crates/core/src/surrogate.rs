//! Shuffle surrogates and the chance-level threshold they imply.
//!
//! Each surrogate permutes every channel's raw samples independently with a
//! ChaCha8 generator seeded from `seed + i`, reruns the full pipeline, and
//! contributes its synchronization values to a pooled sample. The threshold
//! is a nearest-rank percentile of that pool.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MultiChannelRecord;
use crate::pipeline::Pipeline;

/// Recorded in run metadata next to the seed.
pub const PRNG_ID: &str = "rand_chacha::ChaCha8Rng (seed_from_u64)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub count: usize,
    pub percentile: f64,
    pub seed: u64,
    /// When set, each surrogate contributes the means of consecutive
    /// `block`-sample stretches of its valid range instead of every
    /// per-sample value.
    #[serde(default)]
    pub block: Option<usize>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            count: 100,
            percentile: 95.0,
            seed: 0,
            block: None,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::validation(format!(
                "surrogate count must be >= 2, got {}",
                self.count
            )));
        }
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::validation(format!(
                "percentile must lie in (0, 100), got {}",
                self.percentile
            )));
        }
        if self.block == Some(0) {
            return Err(Error::validation("block length must be positive"));
        }
        Ok(())
    }
}

/// Independently permutes each channel's samples.
pub fn shuffle_surrogate(record: &MultiChannelRecord, seed: u64) -> MultiChannelRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = record
        .channels()
        .iter()
        .map(|row| {
            let mut row = row.clone();
            row.shuffle(&mut rng);
            row
        })
        .collect();
    record
        .with_samples(samples)
        .expect("permutation preserves record invariants")
}

/// Nearest-rank percentile: the smallest value with at least `pct` percent
/// of the sample at or below it.
pub fn nearest_rank(values: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::validation("percentile of an empty sample"));
    }
    if !(pct > 0.0 && pct < 100.0) {
        return Err(Error::validation(format!(
            "percentile must lie in (0, 100), got {pct}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

fn block_means(values: &[f64], block: usize) -> Vec<f64> {
    values
        .chunks_exact(block)
        .map(|c| c.iter().sum::<f64>() / block as f64)
        .collect()
}

/// Runs `pipeline` on `count` surrogates and pools the values it returns, in
/// surrogate order.
pub fn pooled_values<F>(
    record: &MultiChannelRecord,
    cfg: &SurrogateConfig,
    pipeline: F,
) -> Result<Vec<f64>>
where
    F: Fn(&MultiChannelRecord) -> Result<Vec<f64>> + Sync,
{
    use rayon::prelude::*;
    cfg.validate()?;
    let per_surrogate = (1..=cfg.count as u64)
        .into_par_iter()
        .map(|i| {
            let surrogate = shuffle_surrogate(record, cfg.seed.wrapping_add(i));
            let values = pipeline(&surrogate)?;
            Ok(match cfg.block {
                Some(b) => block_means(&values, b),
                None => values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_surrogate.concat())
}

pub fn threshold_with<F>(
    record: &MultiChannelRecord,
    cfg: &SurrogateConfig,
    pipeline: F,
) -> Result<f64>
where
    F: Fn(&MultiChannelRecord) -> Result<Vec<f64>> + Sync,
{
    nearest_rank(&pooled_values(record, cfg, pipeline)?, cfg.percentile)
}

/// Chance-level threshold for `group` under the full detection pipeline.
pub fn significance_threshold(
    record: &MultiChannelRecord,
    group: &[String],
    pipeline: &Pipeline,
    cfg: &SurrogateConfig,
) -> Result<f64> {
    let sub = record.select(group)?;
    threshold_with(&sub, cfg, |rec| {
        let s = pipeline.run(rec)?;
        Ok(s.valid_values().to_vec())
    })
}
