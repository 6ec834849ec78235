//! Zone adaptation thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("split threshold {split} must be at least 4x the merge threshold {merge}")]
    NoHysteresis { split: usize, merge: usize },
    #[error("cluster count must be at least 2, got {0}")]
    ClusterCount(usize),
}

/// When leaves split and merge. A leaf splits once it grows beyond
/// `split_threshold` peers and initiates a merge once it falls below
/// `merge_threshold`; `split_threshold >= 4 * merge_threshold` keeps the two
/// from oscillating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr")]
pub struct AdaptationPolicy {
    pub split_threshold: usize,
    pub merge_threshold: usize,
    pub cluster_count: usize,
}

impl AdaptationPolicy {
    pub fn new(
        split_threshold: usize,
        merge_threshold: usize,
        cluster_count: usize,
    ) -> Result<Self, PolicyError> {
        if split_threshold < 4 * merge_threshold {
            return Err(PolicyError::NoHysteresis {
                split: split_threshold,
                merge: merge_threshold,
            });
        }
        if cluster_count < 2 {
            return Err(PolicyError::ClusterCount(cluster_count));
        }
        Ok(Self {
            split_threshold,
            merge_threshold,
            cluster_count,
        })
    }
}

impl Default for AdaptationPolicy {
    fn default() -> Self {
        Self {
            split_threshold: 32,
            merge_threshold: 4,
            cluster_count: 2,
        }
    }
}

#[derive(Deserialize)]
struct PolicyRepr {
    #[serde(default = "default_split")]
    split_threshold: usize,
    #[serde(default = "default_merge")]
    merge_threshold: usize,
    #[serde(default = "default_k")]
    cluster_count: usize,
}

fn default_split() -> usize {
    32
}

fn default_merge() -> usize {
    4
}

fn default_k() -> usize {
    2
}

impl TryFrom<PolicyRepr> for AdaptationPolicy {
    type Error = PolicyError;

    fn try_from(r: PolicyRepr) -> Result<Self, Self::Error> {
        AdaptationPolicy::new(r.split_threshold, r.merge_threshold, r.cluster_count)
    }
}
