//! Generic clustering and embedding algorithms.

mod kmeans;
mod silhouette;
mod tsne;

pub use kmeans::{assign, kmeans_fit, kmeans_fit_traced, KMeansModel, MAX_LLOYD_ITERATIONS};
pub use silhouette::silhouette;
pub use tsne::{
    conditional_affinities, kl_divergence, tsne_embed, tsne_embed_with, Embedding2D, TsneOptions,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("perplexity {perplexity} must be below the number of points {n}")]
    PerplexityTooLarge { perplexity: f64, n: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("labels length {labels} does not match {points} points")]
    LabelCount { labels: usize, points: usize },
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Checks all rows share one dimension and are finite; returns the dimension.
pub(crate) fn check_points(points: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let d = points.first().map_or(0, Vec::len);
    for row in points {
        if row.len() != d {
            return Err(ClusterError::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
    }
    Ok(d)
}
