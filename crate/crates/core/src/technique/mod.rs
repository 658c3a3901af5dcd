//! Save-technique discovery for 1v1s and penalties.

mod one_v_one;
mod penalty;

pub use one_v_one::{
    build_1v1_feature, fit_technique_model, representative_saves, OneVOneFeature, TechniqueModel,
    FEATURE_LEN, GKEM_INDEX, TECHNIQUE_CLUSTERS,
};
pub use penalty::{
    cluster_penalties, penalty_features, PenaltyClustering, PenaltyFeature, PENALTY_K_RANGE,
    PENALTY_TERM_NAMES,
};

use crate::cluster::ClusterError;
use crate::pose::PoseError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TechniqueError {
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("need at least {needed} samples, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("thorax level with the reference joint; lean angle undefined")]
    VerticalDegenerate,
    #[error("feature vector has length {found}, expected {expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("GKEM must be non-negative and finite, got {0}")]
    InvalidGkem(f64),
}

/// The four 1v1 save techniques, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechniqueName {
    AggressiveSet,
    PassiveSet,
    Spread,
    Smother,
}

impl TechniqueName {
    pub const ALL: [TechniqueName; 4] = [
        TechniqueName::AggressiveSet,
        TechniqueName::PassiveSet,
        TechniqueName::Spread,
        TechniqueName::Smother,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TechniqueName::AggressiveSet => "aggressive_set",
            TechniqueName::PassiveSet => "passive_set",
            TechniqueName::Spread => "spread",
            TechniqueName::Smother => "smother",
        }
    }
}

impl fmt::Display for TechniqueName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechniqueName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TechniqueName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown technique '{s}'"))
    }
}
