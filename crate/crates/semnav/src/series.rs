//! Step series with validity masks, plus small shared numeric helpers.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// An ordered series of per-step values with a per-step validity mask.
///
/// Invalid slots (steps touching a flagged-missing embedding) hold `NaN`
/// and are excluded from every summary; `values` and `valid` always have
/// equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries<T> {
    pub values: Vec<T>,
    pub valid: Vec<bool>,
}

impl<T: Scalar> StepSeries<T> {
    /// Series in which every step is valid.
    pub fn dense(values: Vec<T>) -> Self {
        let valid = vec![true; values.len()];
        Self { values, valid }
    }

    /// Series built from optional step values; `None` becomes an invalid
    /// `NaN` slot.
    pub fn from_options(values: Vec<Option<T>>) -> Self {
        let valid: Vec<bool> = values.iter().map(Option::is_some).collect();
        let values = values
            .into_iter()
            .map(|v| v.unwrap_or_else(T::nan))
            .collect();
        Self { values, valid }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at valid slots, in order.
    pub fn valid_values(&self) -> impl Iterator<Item = T> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|ok| **ok).count()
    }

    /// Mean over valid slots; `None` when no slot is valid.
    pub fn mean(&self) -> Option<T> {
        mean(&self.valid_values().collect::<Vec<_>>())
    }
}

/// Arithmetic mean; `None` on empty input.
pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum: T = values.iter().copied().sum();
    Some(sum / T::from_count(values.len()))
}

/// Unbiased sample variance (n−1 denominator); `None` when n < 2.
pub fn sample_variance<T: Scalar>(values: &[T]) -> Option<T> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: T = values.iter().map(|v| (*v - m) * (*v - m)).sum();
    Some(ss / T::from_count(values.len() - 1))
}

/// Sample standard deviation (n−1 denominator); `None` when n < 2.
pub fn sample_sd<T: Scalar>(values: &[T]) -> Option<T> {
    sample_variance(values).map(T::sqrt)
}

/// Median; even lengths average the two middle order statistics.
/// `None` on empty input. Values must be comparable (no NaN).
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("median input must not contain NaN"));
    let n = sorted.len();
    let mid = n / 2;
    if n % 2 == 1 {
        Some(sorted[mid])
    } else {
        Some((sorted[mid - 1] + sorted[mid]) / T::from_count(2))
    }
}
