//! Group-level comparisons and cross-backend correlation matrices.
//!
//! Group differences are tested with Welch two-sample t-tests per group
//! pair, Holm-adjusted within each metric family, with pooled-SD Cohen's
//! d as the effect size and integer significance weights at the
//! conventional 0.05/0.01/0.001/0.0001 levels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::series::{mean, sample_variance};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 groups, found {found}")]
    NotEnoughGroups { found: usize },
    #[error("group `{group}` is degenerate: {n} finite value(s), need at least 2")]
    DegenerateGroup { group: String, n: usize },
    #[error("group `{group}` contains a non-finite value")]
    NonFiniteValue { group: String },
    #[error("pooled standard deviation is zero")]
    ZeroPooledSD,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least {needed} observations, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("backends `{backend_a}` and `{backend_b}` share only {found} stream(s), need 3")]
    InsufficientOverlap {
        backend_a: String,
        backend_b: String,
        found: usize,
    },
    #[error("empty input")]
    EmptyInput,
}

/// One group-pair comparison for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult<T> {
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: T,
    pub mean_b: T,
    pub t_statistic: T,
    /// Welch–Satterthwaite degrees of freedom.
    pub degrees_of_freedom: T,
    pub p_raw: T,
    pub p_adjusted: T,
    /// Pooled-SD Cohen's d (a − b); `None` when the pooled SD is zero
    /// with unequal means.
    pub cohens_d: Option<T>,
    /// 0 (not significant) to 4 (p < 0.0001), from the adjusted p.
    pub weight: u8,
    /// Missing values dropped from each group before testing.
    pub n_dropped_a: usize,
    pub n_dropped_b: usize,
}

/// Cohen's d with pooled standard deviation, weights (n_a−1, n_b−1).
/// Sign follows mean_a − mean_b.
pub fn cohens_d<T: Scalar>(a: &[T], b: &[T]) -> Result<T, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::DegenerateGroup {
            group: if a.len() < 2 { "a" } else { "b" }.into(),
            n: a.len().min(b.len()),
        });
    }
    let mean_a = mean(a).expect("non-empty");
    let mean_b = mean(b).expect("non-empty");
    let var_a = sample_variance(a).expect("n >= 2");
    let var_b = sample_variance(b).expect("n >= 2");
    let df_a = T::from_count(a.len() - 1);
    let df_b = T::from_count(b.len() - 1);
    let pooled = ((df_a * var_a + df_b * var_b) / (df_a + df_b)).sqrt();
    if pooled <= T::zero() {
        return Err(StatsError::ZeroPooledSD);
    }
    Ok((mean_a - mean_b) / pooled)
}

/// Integer weight by adjusted significance level: 4 below 0.0001, 3
/// below 0.001, 2 below 0.01, 1 below 0.05, else 0 (strict inequalities).
pub fn significance_weight<T: Scalar>(p_adjusted: T) -> u8 {
    let p = p_adjusted.to_f64().unwrap_or(1.0);
    if p < 0.0001 {
        4
    } else if p < 0.001 {
        3
    } else if p < 0.01 {
        2
    } else if p < 0.05 {
        1
    } else {
        0
    }
}

/// Two-sided p from the t distribution with (possibly fractional)
/// Welch–Satterthwaite df.
fn two_sided_p<T: Scalar>(t_statistic: T, df: T) -> T {
    let t = t_statistic.to_f64().unwrap_or(f64::NAN);
    let df = df.to_f64().unwrap_or(f64::NAN);
    if !t.is_finite() {
        return T::zero();
    }
    if t == 0.0 {
        return T::one();
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = 2.0 * dist.cdf(-t.abs());
    T::from_f64(p.clamp(0.0, 1.0)).unwrap()
}

/// Holm step-down adjustment; never decreases a p-value, caps at 1.
pub fn holm_adjust<T: Scalar>(p_values: &[T]) -> Vec<T> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        p_values[i]
            .partial_cmp(&p_values[j])
            .expect("p-values are not NaN")
    });

    let mut adjusted = vec![T::zero(); m];
    let mut running_max = T::zero();
    for (rank, &idx) in order.iter().enumerate() {
        let factor = T::from_count(m - rank);
        let candidate = (factor * p_values[idx]).min(T::one());
        running_max = running_max.max(candidate);
        adjusted[idx] = running_max;
    }
    adjusted
}

fn welch_t_df<T: Scalar>(a: &[T], b: &[T]) -> (T, T, T, T) {
    let mean_a = mean(a).expect("non-empty");
    let mean_b = mean(b).expect("non-empty");
    let var_a = sample_variance(a).expect("n >= 2");
    let var_b = sample_variance(b).expect("n >= 2");
    let n_a = T::from_count(a.len());
    let n_b = T::from_count(b.len());

    let se_a = var_a / n_a;
    let se_b = var_b / n_b;
    let se = se_a + se_b;

    if se <= T::zero() {
        // both variances zero: t is 0 for equal means, ±inf otherwise
        let diff = mean_a - mean_b;
        let t = if diff == T::zero() {
            T::zero()
        } else if diff > T::zero() {
            T::infinity()
        } else {
            T::neg_infinity()
        };
        return (mean_a, mean_b, t, n_a + n_b - T::from_count(2));
    }

    let t = (mean_a - mean_b) / se.sqrt();
    let df = (se * se)
        / (se_a * se_a / (n_a - T::one()) + se_b * se_b / (n_b - T::one()));
    (mean_a, mean_b, t, df)
}

/// Welch pairwise comparisons over all unordered group pairs for one
/// metric, Holm-adjusted as one family. Groups are taken in sorted name
/// order; each needs at least two finite values.
pub fn welch_pairwise<T: Scalar>(
    metric: &str,
    groups: &BTreeMap<String, Vec<T>>,
) -> Result<Vec<ComparisonResult<T>>, StatsError> {
    let groups_with_drops: BTreeMap<String, (Vec<T>, usize)> = groups
        .iter()
        .map(|(name, values)| (name.clone(), (values.clone(), 0)))
        .collect();
    welch_pairwise_inner(metric, &groups_with_drops)
}

/// Like [`welch_pairwise`] but accepts per-observation missing values
/// (`None`), dropping and counting them per group.
pub fn welch_pairwise_with_missing<T: Scalar>(
    metric: &str,
    groups: &BTreeMap<String, Vec<Option<T>>>,
) -> Result<Vec<ComparisonResult<T>>, StatsError> {
    let cleaned: BTreeMap<String, (Vec<T>, usize)> = groups
        .iter()
        .map(|(name, values)| {
            let present: Vec<T> = values.iter().filter_map(|v| *v).collect();
            let dropped = values.len() - present.len();
            (name.clone(), (present, dropped))
        })
        .collect();
    welch_pairwise_inner(metric, &cleaned)
}

fn welch_pairwise_inner<T: Scalar>(
    metric: &str,
    groups: &BTreeMap<String, (Vec<T>, usize)>,
) -> Result<Vec<ComparisonResult<T>>, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::NotEnoughGroups {
            found: groups.len(),
        });
    }
    for (name, (values, _)) in groups {
        if values.len() < 2 {
            return Err(StatsError::DegenerateGroup {
                group: name.clone(),
                n: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFiniteValue {
                group: name.clone(),
            });
        }
    }

    let names: Vec<&String> = groups.keys().collect();
    let mut results = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            let (a, dropped_a) = &groups[names[i]];
            let (b, dropped_b) = &groups[names[j]];
            let (mean_a, mean_b, t, df) = welch_t_df(a, b);
            let p_raw = two_sided_p(t, df);
            let d = match cohens_d(a, b) {
                Ok(d) => Some(d),
                Err(StatsError::ZeroPooledSD) => {
                    if mean_a == mean_b {
                        Some(T::zero())
                    } else {
                        None
                    }
                }
                Err(other) => return Err(other),
            };
            results.push(ComparisonResult {
                metric: metric.to_string(),
                group_a: names[i].clone(),
                group_b: names[j].clone(),
                n_a: a.len(),
                n_b: b.len(),
                mean_a,
                mean_b,
                t_statistic: t,
                degrees_of_freedom: df,
                p_raw,
                p_adjusted: p_raw, // filled below
                cohens_d: d,
                weight: 0,
                n_dropped_a: *dropped_a,
                n_dropped_b: *dropped_b,
            });
        }
    }

    let raw: Vec<T> = results.iter().map(|r| r.p_raw).collect();
    let adjusted = holm_adjust(&raw);
    for (result, p_adj) in results.iter_mut().zip(adjusted) {
        result.p_adjusted = p_adj;
        result.weight = significance_weight(p_adj);
    }
    Ok(results)
}

/// Aggregate counts over the comparisons of one (dataset, backend, mode):
/// significant-pair count, weighted count, and mean |d|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary<T> {
    pub n_pairs: usize,
    pub n_significant: usize,
    pub weighted_count: u32,
    pub mean_abs_d: Option<T>,
    /// Pairs without a defined effect size (zero pooled SD).
    pub n_d_undefined: usize,
}

pub fn comparison_summary<T: Scalar>(
    results: &[ComparisonResult<T>],
) -> Result<ComparisonSummary<T>, StatsError> {
    if results.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n_significant = results.iter().filter(|r| r.weight > 0).count();
    let weighted_count = results.iter().map(|r| u32::from(r.weight)).sum();
    let d_values: Vec<T> = results
        .iter()
        .filter_map(|r| r.cohens_d.map(|d| d.abs()))
        .collect();
    Ok(ComparisonSummary {
        n_pairs: results.len(),
        n_significant,
        weighted_count,
        mean_abs_d: mean(&d_values),
        n_d_undefined: results.len() - d_values.len(),
    })
}

/// Sample Pearson correlation. `Ok(None)` when either variance is zero;
/// the value is clamped to [−1, 1].
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<Option<T>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { a: x.len(), b: y.len() });
    }
    if x.len() < 3 {
        return Err(StatsError::TooShort { needed: 3, found: x.len() });
    }
    let mean_x = mean(x).expect("non-empty");
    let mean_y = mean(y).expect("non-empty");
    let mut cov = T::zero();
    let mut var_x = T::zero();
    let mut var_y = T::zero();
    for (xi, yi) in x.iter().zip(y) {
        let dx = *xi - mean_x;
        let dy = *yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x <= T::zero() || var_y <= T::zero() {
        return Ok(None);
    }
    let r = cov / (var_x * var_y).sqrt();
    Ok(Some(r.max(-T::one()).min(T::one())))
}

/// One correlation cell with its effective sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonCell<T> {
    pub r: Option<T>,
    pub n: usize,
}

/// Pearson over the pairs where both values are present (listwise drop).
/// Returns a null cell (with its n) when fewer than 3 pairs remain.
pub fn pearson_listwise<T: Scalar>(
    x: &[Option<T>],
    y: &[Option<T>],
) -> Result<PearsonCell<T>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { a: x.len(), b: y.len() });
    }
    if x.len() < 3 {
        return Err(StatsError::TooShort { needed: 3, found: x.len() });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (xi, yi) in x.iter().zip(y) {
        if let (Some(a), Some(b)) = (xi, yi) {
            xs.push(*a);
            ys.push(*b);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Ok(PearsonCell { r: None, n });
    }
    Ok(PearsonCell {
        r: pearson(&xs, &ys)?,
        n,
    })
}

/// Canonical metric order used for matrix axes and reports.
pub const METRIC_NAMES: [&str; 5] = [
    "dist_next",
    "entropy",
    "velocity",
    "acceleration",
    "dist_centroid",
];

/// The five per-trajectory scalar summaries for one (stream, backend).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint<T> {
    pub dist_next: Option<T>,
    pub entropy: Option<T>,
    pub velocity: Option<T>,
    pub acceleration: Option<T>,
    pub dist_centroid: Option<T>,
}

impl<T: Copy> SummaryPoint<T> {
    pub fn get(&self, metric: &str) -> Option<T> {
        match metric {
            "dist_next" => self.dist_next,
            "entropy" => self.entropy,
            "velocity" => self.velocity,
            "acceleration" => self.acceleration,
            "dist_centroid" => self.dist_centroid,
            _ => None,
        }
    }
}

/// One axis label of the cross-model matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisLabel {
    pub metric: String,
    pub backend: String,
}

/// Symmetric Pearson matrix over (metric, backend) pairs, with per-cell
/// effective sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T> {
    pub labels: Vec<AxisLabel>,
    pub r: Vec<Vec<Option<T>>>,
    pub n: Vec<Vec<usize>>,
}

/// Cross-backend correlation matrix.
///
/// `by_backend` maps backend id → stream id → summary point. Summaries
/// are aligned on stream ids per cell; pairs with a missing metric value
/// are dropped listwise. Labels are metric-major (all backends for one
/// metric form a block), which makes inter-model agreement appear as
/// block-diagonal structure. Diagonal cells are 1 by definition.
pub fn cross_model_matrix<T: Scalar>(
    by_backend: &BTreeMap<String, BTreeMap<String, SummaryPoint<T>>>,
) -> Result<CorrelationMatrix<T>, StatsError> {
    if by_backend.len() < 2 {
        return Err(StatsError::NotEnoughGroups {
            found: by_backend.len(),
        });
    }
    let backends: Vec<&String> = by_backend.keys().collect();
    for i in 0..backends.len() {
        for j in (i + 1)..backends.len() {
            let shared = by_backend[backends[i]]
                .keys()
                .filter(|k| by_backend[backends[j]].contains_key(*k))
                .count();
            if shared < 3 {
                return Err(StatsError::InsufficientOverlap {
                    backend_a: backends[i].clone(),
                    backend_b: backends[j].clone(),
                    found: shared,
                });
            }
        }
    }

    let mut labels = Vec::new();
    for metric in METRIC_NAMES {
        for backend in &backends {
            labels.push(AxisLabel {
                metric: metric.to_string(),
                backend: (*backend).clone(),
            });
        }
    }

    let size = labels.len();
    let mut r = vec![vec![None; size]; size];
    let mut n = vec![vec![0usize; size]; size];

    for i in 0..size {
        for j in i..size {
            let (label_i, label_j) = (&labels[i], &labels[j]);
            let rows_i = &by_backend[&label_i.backend];
            let rows_j = &by_backend[&label_j.backend];
            let shared: Vec<&String> = rows_i
                .keys()
                .filter(|k| rows_j.contains_key(*k))
                .collect();
            let x: Vec<Option<T>> = shared
                .iter()
                .map(|k| rows_i[*k].get(&label_i.metric))
                .collect();
            let y: Vec<Option<T>> = shared
                .iter()
                .map(|k| rows_j[*k].get(&label_j.metric))
                .collect();

            let cell = if i == j {
                let defined = x.iter().filter(|v| v.is_some()).count();
                PearsonCell {
                    r: Some(T::one()),
                    n: defined,
                }
            } else if shared.len() < 3 {
                PearsonCell { r: None, n: shared.len() }
            } else {
                pearson_listwise(&x, &y)?
            };

            r[i][j] = cell.r;
            r[j][i] = cell.r;
            n[i][j] = cell.n;
            n[j][i] = cell.n;
        }
    }

    Ok(CorrelationMatrix { labels, r, n })
}
