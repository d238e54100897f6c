//! k-means variants, optimal assignment and cluster accuracy.

mod hungarian;
mod kmeans;
mod metrics;

pub use hungarian::{hungarian, Assignment};
pub use kmeans::{
    balanced_kmeans, kmeans, ss_kmeans, ss_kmeans_balanced, ClusterAssignment, KMeansOptions,
};
pub use metrics::{gcd_accuracy, GcdMetrics};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("K must be positive")]
    ZeroClusters,
    #[error("K = {k} exceeds the {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{labels} labels for {points} points")]
    LabelCount { labels: usize, points: usize },
    #[error("label {label} does not name one of the {k} clusters")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },
}
