//! ZCA whitening of embedding collections.
//!
//! Fit: center by the sample mean, eigendecompose the sample covariance
//! C = U Λ Uᵀ (n−1 denominator), and form W = U (Λ + eps·I)^{−1/2} Uᵀ.
//! W is symmetric, which is what distinguishes ZCA (minimal rotation)
//! from PCA whitening. `verify_isotropy` checks that whitened samples
//! have covariance near the identity.

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::Float;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum WhitenError {
    #[error("need at least 2 samples, found {found}")]
    TooFewSamples { found: usize },
    #[error("non-finite value in sample {row}")]
    NonFiniteInput { row: usize },
    #[error("sample {row} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("covariance is singular (eigenvalue {index} ~ 0) and eps = 0; increase eps")]
    SingularCovariance { index: usize },
    #[error("eps must be non-negative")]
    NegativeEps,
    #[error("vector dimension {found} does not match transform dimension {expected}")]
    ApplyDimension { expected: usize, found: usize },
}

/// Fitted ZCA transform: y = W (x − mean).
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform<T> {
    mean: DVector<T>,
    w: DMatrix<T>,
    eps: T,
    source_count: usize,
}

impl<T: Scalar> WhiteningTransform<T> {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn mean(&self) -> &[T] {
        self.mean.as_slice()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.w
    }

    /// W in row-major order, the persisted layout.
    pub fn w_row_major(&self) -> Vec<T> {
        let d = self.dimension();
        let mut out = Vec::with_capacity(d * d);
        for row in 0..d {
            for col in 0..d {
                out.push(self.w[(row, col)]);
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRepr<T> {
    dim: usize,
    mean: Vec<T>,
    w_row_major: Vec<T>,
    eps: T,
    source_count: usize,
}

impl<T: Scalar + Serialize> Serialize for WhiteningTransform<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TransformRepr {
            dim: self.dimension(),
            mean: self.mean.as_slice().to_vec(),
            w_row_major: self.w_row_major(),
            eps: self.eps,
            source_count: self.source_count,
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for WhiteningTransform<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TransformRepr::<T>::deserialize(deserializer)?;
        if repr.mean.len() != repr.dim || repr.w_row_major.len() != repr.dim * repr.dim {
            return Err(D::Error::custom("transform dimensions inconsistent"));
        }
        Ok(WhiteningTransform {
            mean: DVector::from_vec(repr.mean),
            w: DMatrix::from_row_slice(repr.dim, repr.dim, &repr.w_row_major),
            eps: repr.eps,
            source_count: repr.source_count,
        })
    }
}

fn fmax<T: Scalar>(a: T, b: T) -> T {
    if a > b {
        a
    } else {
        b
    }
}

fn check_samples<T: Scalar>(samples: &[Vec<T>]) -> Result<usize, WhitenError> {
    if samples.len() < 2 {
        return Err(WhitenError::TooFewSamples {
            found: samples.len(),
        });
    }
    let dim = samples[0].len();
    for (row, sample) in samples.iter().enumerate() {
        if sample.len() != dim {
            return Err(WhitenError::DimensionMismatch {
                row,
                expected: dim,
                found: sample.len(),
            });
        }
        if sample.iter().any(|c| !c.is_finite()) {
            return Err(WhitenError::NonFiniteInput { row });
        }
    }
    Ok(dim)
}

/// Sample mean and covariance (n−1 denominator).
fn mean_and_covariance<T: Scalar + RealField>(
    samples: &[Vec<T>],
    dim: usize,
) -> (DVector<T>, DMatrix<T>) {
    let n = samples.len();
    let data = DMatrix::from_fn(n, dim, |r, c| samples[r][c]);
    let mean = data.row_mean().transpose();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = T::from_count(n - 1);
    let cov = centered.transpose() * &centered / denom;
    (mean, cov)
}

/// Fit a ZCA transform over the sample collection.
///
/// Eigenvalues are clamped at zero before the eps shift; with eps = 0 a
/// numerically zero eigenvalue (rank-deficient covariance) is an error
/// instead of an infinite scale.
pub fn fit_zca<T: Scalar + RealField>(
    samples: &[Vec<T>],
    eps: T,
) -> Result<WhiteningTransform<T>, WhitenError> {
    if eps < T::zero() {
        return Err(WhitenError::NegativeEps);
    }
    let dim = check_samples(samples)?;
    let (mean, cov) = mean_and_covariance(samples, dim);

    let eigen = cov.symmetric_eigen();
    let lam_max = eigen
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, l| fmax(acc, *l));
    let zero_tol = lam_max * T::from_count(dim) * Float::epsilon();

    let mut scales = DVector::zeros(dim);
    for (index, lam) in eigen.eigenvalues.iter().enumerate() {
        let clamped = fmax(*lam, T::zero());
        if eps == T::zero() && clamped <= zero_tol {
            return Err(WhitenError::SingularCovariance { index });
        }
        scales[index] = T::one() / Float::sqrt(clamped + eps);
    }

    let u = eigen.eigenvectors;
    let w = &u * DMatrix::from_diagonal(&scales) * u.transpose();
    // enforce exact symmetry against accumulation error
    let half = T::from_f64(0.5).unwrap();
    let w = (&w + w.transpose()) * half;

    Ok(WhiteningTransform {
        mean,
        w,
        eps,
        source_count: samples.len(),
    })
}

/// Apply y = W (x − mean) to one vector.
pub fn apply_one<T: Scalar + RealField>(
    transform: &WhiteningTransform<T>,
    vector: &[T],
) -> Result<Vec<T>, WhitenError> {
    let dim = transform.dimension();
    if vector.len() != dim {
        return Err(WhitenError::ApplyDimension {
            expected: dim,
            found: vector.len(),
        });
    }
    let x = DVector::from_column_slice(vector) - &transform.mean;
    let y = &transform.w * x;
    Ok(y.as_slice().to_vec())
}

/// Apply the transform to a collection of vectors.
pub fn apply_whitening<T: Scalar + RealField>(
    transform: &WhiteningTransform<T>,
    vectors: &[Vec<T>],
) -> Result<Vec<Vec<T>>, WhitenError> {
    vectors.iter().map(|v| apply_one(transform, v)).collect()
}

/// Covariance-identity diagnostics of a (whitened) sample collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyDiagnostics<T> {
    pub max_abs_offdiag: T,
    pub max_abs_diag_minus_one: T,
    pub n_samples: usize,
    pub dim: usize,
    /// n ≤ d: the sample covariance cannot have full rank.
    pub rank_warning: bool,
}

pub fn verify_isotropy<T: Scalar + RealField>(
    samples: &[Vec<T>],
) -> Result<IsotropyDiagnostics<T>, WhitenError> {
    let dim = check_samples(samples)?;
    let (_, cov) = mean_and_covariance(samples, dim);

    let mut max_offdiag = T::zero();
    let mut max_diag = T::zero();
    for row in 0..dim {
        for col in 0..dim {
            let value = cov[(row, col)];
            if row == col {
                max_diag = fmax(max_diag, Float::abs(value - T::one()));
            } else {
                max_offdiag = fmax(max_offdiag, Float::abs(value));
            }
        }
    }

    Ok(IsotropyDiagnostics {
        max_abs_offdiag: max_offdiag,
        max_abs_diag_minus_one: max_diag,
        n_samples: samples.len(),
        dim,
        rank_warning: samples.len() <= dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_covariance_closed_form() {
        let samples = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 0.5],
            vec![0.0, -0.5],
        ];
        // sample covariance: var_x = (1+1)/3 = 2/3, var_y = (0.25+0.25)/3 = 1/6
        let t = fit_zca(&samples, 0.0).unwrap();
        let w = t.matrix();
        assert_abs_diff_eq!(w[(0, 0)], (3.0_f64 / 2.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w[(1, 1)], 6.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[(1, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn already_white_data_maps_to_itself() {
        // zero-mean samples whose covariance is exactly identity
        let h = 0.5_f64;
        let samples = vec![
            vec![3.0_f64.sqrt() * h, 0.0],
            vec![-(3.0_f64.sqrt()) * h, 0.0],
            vec![0.0, 3.0_f64.sqrt() * h],
            vec![0.0, -(3.0_f64.sqrt()) * h],
        ];
        // var per axis = 2 * 3/4 / 3 = 0.5 ... scale so that var = 1
        let samples: Vec<Vec<f64>> =
            samples.iter().map(|s| s.iter().map(|c| c * 2.0_f64.sqrt()).collect()).collect();
        let t = fit_zca(&samples, 0.0).unwrap();
        let whitened = apply_whitening(&t, &samples).unwrap();
        for (orig, white) in samples.iter().zip(&whitened) {
            for (a, b) in orig.iter().zip(white) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn whitened_fit_set_has_identity_covariance() {
        // deterministic anisotropic cloud in 3 dims
        let samples: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 3.0;
                let y = (i as f64 * 0.11).cos() * 0.4 + 0.2 * x;
                let z = (i as f64 * 0.53).sin() * 1.3 - 0.1 * y;
                vec![x, y, z]
            })
            .collect();
        let t = fit_zca(&samples, 0.0).unwrap();
        let whitened = apply_whitening(&t, &samples).unwrap();
        let diag = verify_isotropy(&whitened).unwrap();
        assert!(diag.max_abs_offdiag < 1e-10, "offdiag {}", diag.max_abs_offdiag);
        assert!(diag.max_abs_diag_minus_one < 1e-10, "diag {}", diag.max_abs_diag_minus_one);
        assert!(!diag.rank_warning);
    }

    #[test]
    fn w_is_symmetric() {
        let samples: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 % 3.0])
            .collect();
        let t = fit_zca(&samples, 1e-5).unwrap();
        let w = t.matrix();
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(w[(r, c)], w[(c, r)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mean_maps_to_zero() {
        let samples = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![2.0, 0.0]];
        let t = fit_zca(&samples, 1e-5).unwrap();
        let mean = t.mean().to_vec();
        let y = apply_one(&t, &mean).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_with_eps_stays_finite() {
        // 3 samples in 5 dims
        let samples = vec![
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        let t = fit_zca(&samples, 1e-5).unwrap();
        assert!(t.w_row_major().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn rank_deficient_with_zero_eps_is_error() {
        let samples = vec![
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        let err = fit_zca(&samples, 0.0).unwrap_err();
        assert!(matches!(err, WhitenError::SingularCovariance { .. }));
    }

    #[test]
    fn unwhitened_anisotropic_diagnostics_large() {
        // diag(2, 0.5) covariance target, deterministic samples
        let samples: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.173;
                vec![t.sin() * 2.0, (t * 1.7).cos() * 0.7]
            })
            .collect();
        let diag = verify_isotropy(&samples).unwrap();
        assert!(diag.max_abs_diag_minus_one > 0.1);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(
            fit_zca::<f64>(&[vec![1.0, 2.0]], 0.0),
            Err(WhitenError::TooFewSamples { found: 1 })
        ));
        assert!(matches!(
            verify_isotropy::<f64>(&[]),
            Err(WhitenError::TooFewSamples { found: 0 })
        ));
    }

    #[test]
    fn non_finite_input_rejected() {
        let err = fit_zca(&[vec![1.0, f64::NAN], vec![0.0, 1.0]], 0.0).unwrap_err();
        assert!(matches!(err, WhitenError::NonFiniteInput { row: 0 }));
    }

    #[test]
    fn json_round_trip_preserves_transform() {
        let samples = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![0.0, 0.5]];
        let t = fit_zca(&samples, 1e-5).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: WhiteningTransform<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn apply_dimension_checked() {
        let samples = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        let t = fit_zca(&samples, 1e-5).unwrap();
        assert!(matches!(
            apply_one(&t, &[1.0, 2.0, 3.0]),
            Err(WhitenError::ApplyDimension { expected: 2, found: 3 })
        ));
    }
}
