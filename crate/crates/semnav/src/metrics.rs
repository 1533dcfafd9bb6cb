//! The five trajectory metrics: distance to next, binarized entropy,
//! velocity, acceleration, and distance to centroid.
//!
//! Distance to next and distance to centroid are cosine distances on
//! unit-normalized vectors; velocity and acceleration are discrete
//! derivatives of the raw embeddings scaled by the time factor `alpha`.
//! Steps touching a flagged-missing embedding are masked out of series
//! and summaries rather than interpolated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::StreamKey;
use crate::embed::{EmbeddedTrajectory, PrefixMode};
use crate::scalar::Scalar;
use crate::series::{median, sample_sd, StepSeries};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("zero vector cannot be normalized or compared")]
    ZeroVector,
    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("trajectory too short: need at least {needed} items, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("no embeddings available for the centroid")]
    EmptySet,
    #[error("centroid norm below tolerance")]
    ZeroCentroid,
    #[error("labels ({labels}) do not align with trajectory items ({items})")]
    LabelMismatch { labels: usize, items: usize },
    #[error("trajectories in a centroid scope must share backend and dimension")]
    MixedTrajectories,
}

/// Normalize to unit Euclidean norm; direction preserved.
pub fn unit_normalize<T: Scalar>(v: &[T]) -> Result<Vec<T>, MetricsError> {
    let norm = dot(v, v).sqrt();
    if norm <= T::zero() || !norm.is_finite() {
        return Err(MetricsError::ZeroVector);
    }
    Ok(v.iter().map(|c| *c / norm).collect())
}

/// Cosine distance 1 − a·b/(‖a‖‖b‖), clamped to [0, 2] against
/// floating-point drift.
pub fn cosine_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch { a: a.len(), b: b.len() });
    }
    let norm_a = dot(a, a).sqrt();
    let norm_b = dot(b, b).sqrt();
    if norm_a <= T::zero() || norm_b <= T::zero() || !norm_a.is_finite() || !norm_b.is_finite() {
        return Err(MetricsError::ZeroVector);
    }
    let cosine = dot(a, b) / (norm_a * norm_b);
    let distance = T::one() - cosine;
    Ok(distance.max(T::zero()).min(T::from_count(2)))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Cosine distance between successive unit-normalized points: the step
/// series of "semantic jumps", of length N−1, plus its mean over valid
/// steps.
pub fn distance_to_next<T: Scalar>(
    traj: &EmbeddedTrajectory<T>,
) -> Result<(StepSeries<T>, Option<T>), MetricsError> {
    let n = traj.n_items();
    if n < 2 {
        return Err(MetricsError::TooShort { needed: 2, found: n });
    }
    let mut values = Vec::with_capacity(n - 1);
    for window in traj.points.windows(2) {
        values.push(match (&window[0], &window[1]) {
            (Some(a), Some(b)) => {
                let ua = unit_normalize(a)?;
                let ub = unit_normalize(b)?;
                Some(cosine_distance(&ua, &ub)?)
            }
            _ => None,
        });
    }
    let series = StepSeries::from_options(values);
    let mean = series.mean();
    Ok((series, mean))
}

/// Whether the binary entropy is reported as-is or divided by the number
/// of valid steps (a sensitivity variant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyNormalization {
    #[default]
    Raw,
    PerValidStep,
}

/// Shannon entropy of the median-binarized step series.
///
/// Valid steps are split at their median θ into b_t = 1 iff value ≥ θ;
/// with p the fraction of ones, H = −p·log2 p − (1−p)·log2(1−p), and
/// H = 0 when p ∈ {0, 1}. Undefined (`None`) with fewer than three valid
/// steps.
pub fn binarized_entropy<T: Scalar>(series: &StepSeries<T>) -> Option<T> {
    binarized_entropy_with(series, EntropyNormalization::Raw)
}

pub fn binarized_entropy_with<T: Scalar>(
    series: &StepSeries<T>,
    normalization: EntropyNormalization,
) -> Option<T> {
    let values: Vec<T> = series.valid_values().collect();
    if values.len() < 3 {
        return None;
    }
    let theta = median(&values)?;
    let ones = values.iter().filter(|v| **v >= theta).count();
    let n = values.len();
    let p = T::from_count(ones) / T::from_count(n);

    let h = if ones == 0 || ones == n {
        T::zero()
    } else {
        let q = T::one() - p;
        -(p * p.log2()) - (q * q.log2())
    };

    Some(match normalization {
        EntropyNormalization::Raw => h,
        EntropyNormalization::PerValidStep => h / T::from_count(n),
    })
}

/// Default approximate-entropy radius: 0.2 × SD of the valid steps.
pub fn default_apen_radius<T: Scalar>(series: &StepSeries<T>) -> Option<T> {
    let values: Vec<T> = series.valid_values().collect();
    sample_sd(&values).map(|sd| T::from_f64(0.2).unwrap() * sd)
}

/// Approximate entropy ApEn(m, r) of the valid steps: Φ^m(r) − Φ^{m+1}(r)
/// with Φ^m the average log fraction of m-windows within Chebyshev
/// distance r, self-matches included.
pub fn approximate_entropy<T: Scalar>(
    series: &StepSeries<T>,
    m: usize,
    r: T,
) -> Result<T, MetricsError> {
    let values: Vec<T> = series.valid_values().collect();
    let n = values.len();
    if n < m + 2 {
        return Err(MetricsError::TooShort { needed: m + 2, found: n });
    }

    let phi = |window: usize| -> T {
        let count = n - window + 1;
        let mut total = T::zero();
        for i in 0..count {
            let mut matches = 0usize;
            for j in 0..count {
                let mut within = true;
                for k in 0..window {
                    if (values[i + k] - values[j + k]).abs() > r {
                        within = false;
                        break;
                    }
                }
                if within {
                    matches += 1;
                }
            }
            total += (T::from_count(matches) / T::from_count(count)).ln();
        }
        total / T::from_count(count)
    };

    Ok(phi(m) - phi(m + 1))
}

/// Discrete derivative of a trajectory: per-step vectors, magnitudes, and
/// the magnitude mean over valid steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics<T> {
    pub vectors: Vec<Option<Vec<T>>>,
    pub magnitudes: StepSeries<T>,
    pub mean: Option<T>,
}

/// Velocity v_t = α(x_{t+1} − x_t) on the raw embeddings, t = 1..N−1;
/// the final item has no velocity.
pub fn velocity<T: Scalar>(
    traj: &EmbeddedTrajectory<T>,
    alpha: T,
) -> Result<Kinematics<T>, MetricsError> {
    let n = traj.n_items();
    if n < 2 {
        return Err(MetricsError::TooShort { needed: 2, found: n });
    }
    let vectors: Vec<Option<Vec<T>>> = traj
        .points
        .windows(2)
        .map(|w| match (&w[0], &w[1]) {
            (Some(a), Some(b)) => Some(
                b.iter()
                    .zip(a)
                    .map(|(next, current)| alpha * (*next - *current))
                    .collect(),
            ),
            _ => None,
        })
        .collect();
    Ok(kinematics_from_vectors(vectors))
}

/// Acceleration a_t = α²(x_{t+2} − 2x_{t+1} + x_t), t = 1..N−2; the final
/// two items have no acceleration.
pub fn acceleration<T: Scalar>(
    traj: &EmbeddedTrajectory<T>,
    alpha: T,
) -> Result<Kinematics<T>, MetricsError> {
    let n = traj.n_items();
    if n < 3 {
        return Err(MetricsError::TooShort { needed: 3, found: n });
    }
    let alpha_sq = alpha * alpha;
    let two = T::from_count(2);
    let vectors: Vec<Option<Vec<T>>> = traj
        .points
        .windows(3)
        .map(|w| match (&w[0], &w[1], &w[2]) {
            (Some(x0), Some(x1), Some(x2)) => Some(
                x0.iter()
                    .zip(x1)
                    .zip(x2)
                    .map(|((a, b), c)| alpha_sq * (*c - two * *b + *a))
                    .collect(),
            ),
            _ => None,
        })
        .collect();
    Ok(kinematics_from_vectors(vectors))
}

fn kinematics_from_vectors<T: Scalar>(vectors: Vec<Option<Vec<T>>>) -> Kinematics<T> {
    let magnitudes = StepSeries::from_options(
        vectors
            .iter()
            .map(|v| v.as_ref().map(|vec| dot(vec, vec).sqrt()))
            .collect(),
    );
    let mean = magnitudes.mean();
    Kinematics {
        vectors,
        magnitudes,
        mean,
    }
}

/// A trajectory paired with per-item property labels (the item texts),
/// used to collapse repeated properties in the centroid computation.
pub struct LabeledTrajectory<'a, T> {
    pub trajectory: &'a EmbeddedTrajectory<T>,
    pub labels: &'a [String],
}

/// Distance-to-centroid results for one (participant, concept) scope.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidDistances<T> {
    /// Per-item distances, one series per input trajectory, each of
    /// length N (repeated properties included).
    pub per_trajectory: Vec<StepSeries<T>>,
    pub means: Vec<Option<T>>,
    /// Mean of the unique-property unit-normalized embeddings.
    pub centroid: Vec<T>,
    pub n_unique: usize,
}

/// Cosine distance of every item to the centroid of the scope's unique
/// properties.
///
/// Repeated labels are collapsed to their first embedded occurrence (in
/// trial order, then item order); the centroid is the arithmetic mean of
/// those unit-normalized embeddings. Every item, including repeats, is
/// then assigned the cosine distance between its own embedding and the
/// centroid; items with missing embeddings are masked.
pub fn distance_to_centroid<T: Scalar>(
    trials: &[LabeledTrajectory<'_, T>],
) -> Result<CentroidDistances<T>, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let backend = &trials[0].trajectory.backend_id;
    let dimension = trials[0].trajectory.dimension;
    for trial in trials {
        if trial.labels.len() != trial.trajectory.n_items() {
            return Err(MetricsError::LabelMismatch {
                labels: trial.labels.len(),
                items: trial.trajectory.n_items(),
            });
        }
        if &trial.trajectory.backend_id != backend || trial.trajectory.dimension != dimension {
            return Err(MetricsError::MixedTrajectories);
        }
    }

    // first embedded occurrence per unique label
    let mut seen: Vec<&str> = Vec::new();
    let mut unique_embeddings: Vec<Vec<T>> = Vec::new();
    for trial in trials {
        for (label, point) in trial.labels.iter().zip(&trial.trajectory.points) {
            if seen.iter().any(|s| *s == label.as_str()) {
                continue;
            }
            if let Some(embedding) = point {
                seen.push(label.as_str());
                unique_embeddings.push(unit_normalize(embedding)?);
            }
        }
    }
    if unique_embeddings.is_empty() {
        return Err(MetricsError::EmptySet);
    }

    let n_unique = unique_embeddings.len();
    let count = T::from_count(n_unique);
    let mut centroid = vec![T::zero(); dimension];
    for embedding in &unique_embeddings {
        for (acc, c) in centroid.iter_mut().zip(embedding) {
            *acc += *c;
        }
    }
    for c in centroid.iter_mut() {
        *c /= count;
    }
    let centroid_norm = dot(&centroid, &centroid).sqrt();
    if centroid_norm < T::from_f64(1e-12).unwrap() {
        return Err(MetricsError::ZeroCentroid);
    }

    let mut per_trajectory = Vec::with_capacity(trials.len());
    let mut means = Vec::with_capacity(trials.len());
    for trial in trials {
        let mut distances = Vec::with_capacity(trial.trajectory.n_items());
        for point in &trial.trajectory.points {
            distances.push(match point {
                Some(embedding) => {
                    let unit = unit_normalize(embedding)?;
                    Some(cosine_distance(&unit, &centroid)?)
                }
                None => None,
            });
        }
        let series = StepSeries::from_options(distances);
        means.push(series.mean());
        per_trajectory.push(series);
    }

    Ok(CentroidDistances {
        per_trajectory,
        means,
        centroid,
        n_unique,
    })
}

/// Options for [`summarize`].
#[derive(Debug, Clone, Copy)]
pub struct MetricsConfig<T> {
    /// Time-scale factor for velocity (α) and acceleration (α²).
    pub alpha: T,
    pub entropy_normalization: EntropyNormalization,
    /// ApEn window length when `apen_enabled`.
    pub apen_m: usize,
    pub apen_enabled: bool,
}

impl<T: Scalar> Default for MetricsConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            entropy_normalization: EntropyNormalization::Raw,
            apen_m: 2,
            apen_enabled: false,
        }
    }
}

/// All five metrics for one trajectory: step series plus scalar summaries.
/// Entropy is `None` (undefined, not zero) below three valid steps; the
/// other summaries are `None` when no valid step exists.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMetrics<T> {
    pub key: StreamKey,
    pub backend_id: String,
    pub prefix_mode: PrefixMode,
    pub n_items: usize,
    pub n_present: usize,
    pub alpha: T,
    pub dist_next: StepSeries<T>,
    pub dist_next_mean: Option<T>,
    pub entropy: Option<T>,
    pub approx_entropy: Option<T>,
    pub velocity_mag: StepSeries<T>,
    pub velocity_mean: Option<T>,
    pub accel_mag: StepSeries<T>,
    pub accel_mean: Option<T>,
    pub dist_centroid: StepSeries<T>,
    pub dist_centroid_mean: Option<T>,
}

/// Compute all five metrics for one trajectory.
///
/// Series that need more items than the trajectory has come back empty
/// (N = 1 has no steps); this is not an error. `centroid_source`
/// optionally supplies the embeddings used for the centroid metric (e.g.
/// standalone item embeddings instead of cumulative prefixes); it must
/// describe the same items.
pub fn summarize<T: Scalar>(
    traj: &EmbeddedTrajectory<T>,
    labels: &[String],
    centroid_source: Option<&EmbeddedTrajectory<T>>,
    config: &MetricsConfig<T>,
) -> Result<TrajectoryMetrics<T>, MetricsError> {
    let n = traj.n_items();
    if labels.len() != n {
        return Err(MetricsError::LabelMismatch {
            labels: labels.len(),
            items: n,
        });
    }

    let (dist_next, dist_next_mean) = if n >= 2 {
        distance_to_next(traj)?
    } else {
        (StepSeries::dense(Vec::new()), None)
    };
    let entropy = binarized_entropy_with(&dist_next, config.entropy_normalization);
    let approx_entropy = if config.apen_enabled {
        default_apen_radius(&dist_next)
            .and_then(|r| approximate_entropy(&dist_next, config.apen_m, r).ok())
    } else {
        None
    };

    let (velocity_mag, velocity_mean) = if n >= 2 {
        let k = velocity(traj, config.alpha)?;
        (k.magnitudes, k.mean)
    } else {
        (StepSeries::dense(Vec::new()), None)
    };
    let (accel_mag, accel_mean) = if n >= 3 {
        let k = acceleration(traj, config.alpha)?;
        (k.magnitudes, k.mean)
    } else {
        (StepSeries::dense(Vec::new()), None)
    };

    let centroid_traj = centroid_source.unwrap_or(traj);
    if centroid_traj.n_items() != n {
        return Err(MetricsError::LabelMismatch {
            labels: n,
            items: centroid_traj.n_items(),
        });
    }
    let centroid = distance_to_centroid(&[LabeledTrajectory {
        trajectory: centroid_traj,
        labels,
    }])?;
    let dist_centroid = centroid.per_trajectory.into_iter().next().expect("one trial");
    let dist_centroid_mean = centroid.means[0];

    Ok(TrajectoryMetrics {
        key: traj.key.clone(),
        backend_id: traj.backend_id.clone(),
        prefix_mode: traj.prefix_mode,
        n_items: n,
        n_present: traj.n_present(),
        alpha: config.alpha,
        dist_next,
        dist_next_mean,
        entropy,
        approx_entropy,
        velocity_mag,
        velocity_mean,
        accel_mag,
        accel_mean,
        dist_centroid,
        dist_centroid_mean,
    })
}
