//! Active Subspaces baseline: averaged gradient outer products, their
//! eigendecomposition, and a 1-D surrogate along the dominant direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AmError, Result};
use crate::geometry::GradientField;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::{dot, Scalar};
use crate::surrogate::{fit_polynomial, Evaluation, PolynomialSurrogate, SurrogateRecord};

const CHUNK: usize = 4096;

/// `C = (1/N) sum g g^T` over raw gradients stored flat, `n` entries each.
///
/// Partial sums over fixed chunks are combined in order, so the result is
/// independent of scheduling.
pub fn compute_c_matrix_flat<T: Scalar>(gradients: &[T], n: usize) -> Result<Matrix<T>> {
    if n == 0 {
        return Err(AmError::ZeroDimension);
    }
    if gradients.is_empty() {
        return Err(AmError::EmptyInput("gradients"));
    }
    if !gradients.len().is_multiple_of(n) {
        return Err(AmError::DimensionMismatch {
            expected: n,
            found: gradients.len() % n,
        });
    }
    let count = gradients.len() / n;
    let partials: Vec<Vec<T>> = gradients
        .par_chunks(CHUNK * n)
        .map(|chunk| {
            let mut upper = vec![T::zero(); n * n];
            for g in chunk.chunks_exact(n) {
                for i in 0..n {
                    for j in i..n {
                        upper[i * n + j] = upper[i * n + j] + g[i] * g[j];
                    }
                }
            }
            upper
        })
        .collect();
    let mut c = Matrix::zeros(n, n);
    for part in &partials {
        for i in 0..n {
            for j in i..n {
                c[(i, j)] = c[(i, j)] + part[i * n + j];
            }
        }
    }
    let inv = T::one() / T::from_index(count);
    for i in 0..n {
        for j in i..n {
            let v = c[(i, j)] * inv;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// `C = (1/N) sum g g^T`; exactly symmetric.
pub fn compute_c_matrix<T: Scalar>(gradients: &[Vec<T>]) -> Result<Matrix<T>> {
    let n = gradients
        .first()
        .ok_or(AmError::EmptyInput("gradients"))?
        .len();
    if let Some(g) = gradients.iter().find(|g| g.len() != n) {
        return Err(AmError::DimensionMismatch {
            expected: n,
            found: g.len(),
        });
    }
    compute_c_matrix_flat(&gradients.concat(), n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSubspaceModel<T> {
    pub c: Matrix<T>,
    /// Descending.
    pub eigenvalues: Vec<T>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: Matrix<T>,
    pub active_direction: Vec<T>,
    pub surrogate: PolynomialSurrogate<T>,
}

impl<T: Scalar> ActiveSubspaceModel<T> {
    pub fn dimension(&self) -> usize {
        self.active_direction.len()
    }

    /// Coordinate of `p` along the active direction.
    pub fn project(&self, p: &[T]) -> T {
        dot(p, &self.active_direction)
    }
}

/// Fits the baseline from samples: `locations` and raw `gradients` flat
/// row-major with `n` entries per sample, `values` one per sample.
pub fn build_as_model_flat<T: Scalar>(
    n: usize,
    locations: &[T],
    gradients: &[T],
    values: &[T],
    degree: usize,
) -> Result<ActiveSubspaceModel<T>> {
    if locations.len() != values.len() * n || gradients.len() != values.len() * n {
        return Err(AmError::DimensionMismatch {
            expected: values.len() * n,
            found: locations.len().max(gradients.len()),
        });
    }
    let c = compute_c_matrix_flat(gradients, n)?;
    let eig = symmetric_eigen(&c)?;
    let active_direction = eig.vectors.column(0);
    let pairs: Vec<(T, T)> = locations
        .chunks_exact(n)
        .zip(values)
        .map(|(x, &f)| (dot(x, &active_direction), f))
        .collect();
    let surrogate = fit_polynomial(&pairs, degree)?;
    Ok(ActiveSubspaceModel {
        c,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        active_direction,
        surrogate,
    })
}

/// Fits the baseline from per-sample vectors.
pub fn build_as_model<T: Scalar>(
    locations: &[Vec<T>],
    gradients: &[Vec<T>],
    values: &[T],
    degree: usize,
) -> Result<ActiveSubspaceModel<T>> {
    let n = locations
        .first()
        .ok_or(AmError::EmptyInput("samples"))?
        .len();
    if locations.iter().chain(gradients).any(|v| v.len() != n) {
        return Err(AmError::DimensionMismatch {
            expected: n,
            found: 0,
        });
    }
    build_as_model_flat(n, &locations.concat(), &gradients.concat(), values, degree)
}

/// Fits the baseline on every sample of a gradient field, using the raw
/// (unnormalized) gradients.
pub fn build_as_model_from_field<T: Scalar>(
    field: &GradientField<T>,
    degree: usize,
) -> Result<ActiveSubspaceModel<T>> {
    let n = field.dimension();
    let mut locations = Vec::with_capacity(field.len() * n);
    for i in 0..field.len() {
        locations.extend_from_slice(&field.lattice().location(i));
    }
    build_as_model_flat(n, &locations, field.raw_gradients(), field.values(), degree)
}

/// Surrogate value at the projection of `p` onto the active direction.
pub fn as_estimate<T: Scalar>(model: &ActiveSubspaceModel<T>, p: &[T]) -> Evaluation<T> {
    model.surrogate.evaluate(model.project(p))
}

/// Serialized form of an active subspace model (one JSON-lines record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRecord {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors, one inner vector per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    pub surrogate: SurrogateRecord,
}

impl<T: Scalar> From<&ActiveSubspaceModel<T>> for SubspaceRecord {
    fn from(m: &ActiveSubspaceModel<T>) -> Self {
        let n = m.dimension();
        SubspaceRecord {
            eigenvalues: m.eigenvalues.iter().map(|v| v.as_f64()).collect(),
            eigenvectors: (0..n)
                .map(|j| {
                    m.eigenvectors
                        .column(j)
                        .into_iter()
                        .map(|v| v.as_f64())
                        .collect()
                })
                .collect(),
            surrogate: SurrogateRecord::from(&m.surrogate),
        }
    }
}
