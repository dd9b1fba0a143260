//! Batch bottleneck analysis for SPMD parallel programs.
//!
//! The pipeline takes a per-process, per-code-region profile and answers
//! three questions: do bottlenecks exist, where are they, and why.
//!
//! * External bottlenecks (inter-process imbalance) are detected by density
//!   clustering of per-process CPU-time vectors and localized by a top-down
//!   zero-out/restore search over the code-region tree.
//! * Internal bottlenecks (per-process inefficiency) are ranked by the
//!   normalized metric CRNM = (region wall time / program wall time) x CPI,
//!   classified into severity categories with one-dimensional k-means.
//! * Root causes are extracted with a rough-set reduction: decision tables
//!   over five metric attributes, a discernibility matrix, and minimal-core
//!   selection.

pub mod clustering;
pub mod external;
pub mod fixtures;
pub mod internal;
pub mod profile;
pub mod report;
pub mod rough_set;
pub mod synth;

use thiserror::Error;

/// Tunables of the density clustering used by the external analysis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnalysisConfig {
    /// Cluster radius as a fraction of the seed vector's length.
    pub threshold_fraction: f64,
    /// A seed needs strictly more than this many in-threshold points.
    pub count_threshold: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            threshold_fraction: 0.10,
            count_threshold: 2,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("threshold fraction must be in (0, 1), got {0}")]
    ThresholdFraction(f64),
    #[error("count threshold must be at least 1, got {0}")]
    CountThreshold(usize),
}

impl AnalysisConfig {
    pub fn new(threshold_fraction: f64, count_threshold: usize) -> Result<Self, ConfigError> {
        if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
            return Err(ConfigError::ThresholdFraction(threshold_fraction));
        }
        if count_threshold < 1 {
            return Err(ConfigError::CountThreshold(count_threshold));
        }
        Ok(AnalysisConfig {
            threshold_fraction,
            count_threshold,
        })
    }
}

pub use clustering::{ClusteringOutcome, PerfVector, SeverityCategory};
pub use profile::{ingest_profile, MetricKind, Profile, RegionId, RegionMetrics};
