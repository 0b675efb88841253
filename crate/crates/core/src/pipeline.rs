use crate::error::Result;
use crate::ingest::MultiChannelRecord;
use crate::peaks::{detect_record, DetectorConfig, PeakTrain};
use crate::preprocess::{self, FilterSpec};
use crate::sync::{multi_sync, SyncSeries};
use crate::weights::WeightVector;

/// Filter, detect, then score every channel of a record as one group.
#[derive(Debug, Clone)]
pub struct Pipeline {
    /// `None` skips filtering.
    pub filter: Option<FilterSpec>,
    pub detector: DetectorConfig,
    pub weights: WeightVector,
}

impl Pipeline {
    pub fn trains(&self, record: &MultiChannelRecord) -> Result<Vec<PeakTrain>> {
        match &self.filter {
            Some(spec) => detect_record(&preprocess::apply(record, spec)?, &self.detector),
            None => detect_record(record, &self.detector),
        }
    }

    pub fn run(&self, record: &MultiChannelRecord) -> Result<SyncSeries> {
        multi_sync(&self.trains(record)?, &self.weights)
    }
}
