//! Embedding-space trajectory analytics for concept production sequences.
//!
//! A concept stream (the ordered items a participant produces for one
//! concept) is mapped to a trajectory of text embeddings, either
//! cumulatively (point `t` embeds items `1..=t` joined by spaces) or
//! per item. Five metrics characterize each trajectory: distance to
//! next, binarized entropy of the step series, velocity, acceleration,
//! and distance to centroid. Group-level statistics (Welch pairwise
//! tests with Holm correction, Cohen's d, weighted significance counts)
//! and cross-backend Pearson correlation matrices summarize the results,
//! with optional ZCA whitening of the embedding collections.
//!
//! Numeric code is generic over the scalar type through [`Scalar`];
//! `f64` aliases for the main types are exported at the crate root.

pub mod datamodel;
pub mod embed;
pub mod metrics;
pub mod scalar;
pub mod series;
pub mod stats;
pub mod whiten;

pub use scalar::Scalar;

/// `f64` instantiations used by the command-line pipeline.
pub type StepSeries64 = series::StepSeries<f64>;
pub type VectorTable64 = embed::VectorTable<f64>;
pub type EmbeddedTrajectory64 = embed::EmbeddedTrajectory<f64>;
pub type TrajectoryMetrics64 = metrics::TrajectoryMetrics<f64>;
pub type WhiteningTransform64 = whiten::WhiteningTransform<f64>;
pub type ComparisonResult64 = stats::ComparisonResult<f64>;
pub type CorrelationMatrix64 = stats::CorrelationMatrix<f64>;
