//! Peak synchronization for multichannel signals.
//!
//! The crate turns raw channels into binary peak trains, scores how closely
//! peaks co-occur across channels with lag-dependent weights, and provides
//! the surrounding machinery: filtering, surrogate significance, a
//! correlation-eigenvalue baseline and synthetic fixtures.
//!
//! ```text
//! ingest -> preprocess -> peaks -> sync (weights) -> compound / rank
//!                                   \-> surrogate threshold
//! ingest -> correlate (eigenvalue tracks)
//! ```

pub mod cli;
pub mod correlate;
pub mod error;
pub mod ingest;
pub mod peaks;
pub mod pipeline;
pub mod preprocess;
pub mod surrogate;
pub mod sync;
pub mod synth;
pub mod weights;

pub use error::{Error, Result};
pub use ingest::MultiChannelRecord;
pub use peaks::{detect_peaks, DetectorConfig, PeakTrain, Polarity};
pub use pipeline::Pipeline;
pub use preprocess::FilterSpec;
pub use surrogate::SurrogateConfig;
pub use sync::{compound, multi_sync, pairwise_sync, rank_groups, GroupScore, SyncSeries};
pub use weights::{build_weights, DensitySpec, WeightVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
