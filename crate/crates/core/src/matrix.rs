//! Dense symmetric-matrix kernels on the rank-deficient cone: Moore–Penrose
//! pseudo-inverse, pseudo-determinant, the centering projector, and the
//! validated variogram / precision matrix types.
//!
//! All spectral work goes through a single primitive, the symmetric
//! eigendecomposition. No Cholesky is attempted on rank-deficient matrices.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative eigenvalue threshold below which a matrix is treated as rank
/// deficient. The kernel of every matrix in scope is span{1}, so a loose
/// relative cut is safe.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative threshold for the strict conditional-negative-definiteness test.
pub const DEFAULT_CND_TOL: f64 = 1e-8;

/// Relative threshold for positive semi-definiteness, zero row sums and the
/// rank d-1 test of precision matrices.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// Asymmetry above this level triggers a validation error instead of silent
/// averaging.
pub const SYM_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {diff:.3e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("diagonal entry {i} is {value:.3e}, expected zero")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("off-diagonal entry ({i},{j}) is {value:.3e}, expected > 0")]
    NonPositiveOffDiagonal { i: usize, j: usize, value: f64 },
    #[error("not strictly conditionally negative definite: eigenvalue {eigenvalue:.3e} of the projected matrix")]
    NotConditionallyNegativeDefinite { eigenvalue: f64 },
    #[error("not positive semi-definite: eigenvalue {eigenvalue:.3e}")]
    NotPsd { eigenvalue: f64 },
    #[error("row sums are not zero: max |row sum| = {max_abs:.3e}")]
    NonzeroRowSums { max_abs: f64 },
    #[error("rank is {rank}, expected {expected}")]
    WrongRank { rank: usize, expected: usize },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("dimension {d} is too small, need at least {min}")]
    DimensionTooSmall { d: usize, min: usize },
}

/// A dense symmetric matrix. Construction canonicalizes the input as
/// (A + Aᵀ)/2 and rejects inputs whose asymmetry exceeds [`SYM_TOL`]
/// relative to the largest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self, MatrixError> {
        if a.nrows() != a.ncols() {
            return Err(MatrixError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for i in 0..a.nrows() {
            for j in (i + 1)..a.ncols() {
                let diff = (a[(i, j)] - a[(j, i)]).abs();
                if diff > SYM_TOL * scale {
                    return Err(MatrixError::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self::symmetrize(a))
    }

    /// Symmetrizes unconditionally, without the asymmetry guard.
    pub fn symmetrize(a: DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "symmetrize requires a square matrix");
        let mut m = a.clone();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
            }
        }
        Self { inner: m }
    }

    pub fn from_fn(d: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self::symmetrize(DMatrix::from_fn(d, d, f))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    /// Eigenvalues in ascending order together with the orthonormal
    /// eigenvector matrix (columns match the eigenvalue order).
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let se = self.inner.clone().symmetric_eigen();
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values = DVector::from_fn(d, |i, _| se.eigenvalues[order[i]]);
        let vectors = DMatrix::from_fn(d, d, |i, j| se.eigenvectors[(i, order[j])]);
        (values, vectors)
    }
}

/// The orthogonal projection onto the complement of the all-ones vector:
/// Π = I − (1/d)𝟏𝟏ᵀ.
pub fn centering_projector(d: usize) -> SymMatrix {
    assert!(d >= 1, "dimension must be positive");
    let inv = 1.0 / d as f64;
    SymMatrix::from_fn(d, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix via its spectral
/// decomposition. Eigenvalues with |λ| ≤ rank_tol·max|λ| are treated as zero.
pub fn pseudo_inverse(a: &SymMatrix, rank_tol: f64) -> SymMatrix {
    let (values, q) = a.eigen();
    let cutoff = rank_tol * values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let d = a.dim();
    let inv = DVector::from_fn(d, |i, _| {
        let l = values[i];
        if l.abs() > cutoff {
            1.0 / l
        } else {
            0.0
        }
    });
    let m = &q * DMatrix::from_diagonal(&inv) * q.transpose();
    SymMatrix::symmetrize(m)
}

/// Product of the numerically nonzero eigenvalues. By convention the value
/// is 1 when every eigenvalue vanishes.
pub fn pseudo_determinant(a: &SymMatrix, rank_tol: f64) -> f64 {
    let (values, _) = a.eigen();
    let cutoff = rank_tol * values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    values
        .iter()
        .filter(|l| l.abs() > cutoff)
        .product::<f64>()
}

/// Logarithm of the pseudo-determinant of a positive semi-definite matrix,
/// accumulated in log space to avoid under- or overflow.
pub fn log_pseudo_determinant(a: &SymMatrix, rank_tol: f64) -> f64 {
    let (values, _) = a.eigen();
    let cutoff = rank_tol * values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    values
        .iter()
        .filter(|l| l.abs() > cutoff)
        .map(|l| l.ln())
        .sum()
}

/// A variogram matrix: symmetric, zero diagonal, strictly conditionally
/// negative definite (vᵀΓv < 0 for every nonzero v ⊥ 𝟏). These matrices
/// parameterize the dependence model and double as squared Euclidean
/// distance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct VariogramMatrix {
    inner: SymMatrix,
}

impl VariogramMatrix {
    /// Wraps a matrix that is known to lie in the cone, e.g. because it was
    /// produced by an exact map from another validated value. The diagonal
    /// is still forced to exact zeros.
    pub(crate) fn new_unchecked(a: SymMatrix) -> Self {
        let mut m = a.into_matrix();
        for i in 0..m.nrows() {
            m[(i, i)] = 0.0;
        }
        VariogramMatrix {
            inner: SymMatrix { inner: m },
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.inner.matrix()[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.inner.matrix()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.inner
    }

    /// Restriction Γ_{I×I} to a subset of indices; sub-models of a valid
    /// variogram are valid again.
    pub fn sub_model(&self, indices: &[usize]) -> VariogramMatrix {
        let m = self.matrix();
        let sub = DMatrix::from_fn(indices.len(), indices.len(), |i, j| {
            m[(indices[i], indices[j])]
        });
        VariogramMatrix {
            inner: SymMatrix::symmetrize(sub),
        }
    }
}

/// Validates membership in the variogram cone: zero diagonal, strictly
/// positive off-diagonal entries, and strict conditional negative
/// definiteness, tested through the eigenvalues of Π(−½Γ)Π (one eigenvalue
/// near zero for the 𝟏-kernel, the remaining d−1 strictly positive).
pub fn check_variogram(a: &SymMatrix, cnd_tol: f64) -> Result<VariogramMatrix, MatrixError> {
    let d = a.dim();
    if d == 0 {
        return Err(MatrixError::DimensionTooSmall { d, min: 1 });
    }
    let m = a.matrix();
    let scale = m.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    for i in 0..d {
        let v = m[(i, i)];
        if v.abs() > 1e-9 * scale {
            return Err(MatrixError::NonzeroDiagonal { i, value: v });
        }
    }
    if d == 1 {
        return Ok(VariogramMatrix {
            inner: SymMatrix::from_fn(1, |_, _| 0.0),
        });
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let v = m[(i, j)];
            if v <= 0.0 {
                return Err(MatrixError::NonPositiveOffDiagonal { i, j, value: v });
            }
        }
    }
    // Σ = Π(−½Γ)Π must be PSD with exactly one vanishing eigenvalue.
    let sigma = project_neg_half(a);
    let (values, _) = sigma.eigen();
    let lmax = values[d - 1].max(0.0);
    let cut = cnd_tol * lmax.max(f64::MIN_POSITIVE);
    if values[0] < -cut {
        return Err(MatrixError::NotConditionallyNegativeDefinite {
            eigenvalue: values[0],
        });
    }
    if values[1] <= cut {
        return Err(MatrixError::NotConditionallyNegativeDefinite {
            eigenvalue: values[1],
        });
    }
    // Canonicalize the diagonal to exact zeros.
    let mut clean = m.clone();
    for i in 0..d {
        clean[(i, i)] = 0.0;
    }
    Ok(VariogramMatrix {
        inner: SymMatrix::symmetrize(clean),
    })
}

/// Computes Π(−½A)Π without forming Π explicitly.
pub(crate) fn project_neg_half(a: &SymMatrix) -> SymMatrix {
    let d = a.dim();
    let m = a.matrix();
    let half = m.map(|x| -0.5 * x);
    let row_means = DVector::from_fn(d, |i, _| half.row(i).sum() / d as f64);
    let total_mean = row_means.sum() / d as f64;
    let projected = DMatrix::from_fn(d, d, |i, j| {
        half[(i, j)] - row_means[i] - row_means[j] + total_mean
    });
    SymMatrix::symmetrize(projected)
}

/// A precision matrix: positive semi-definite with kernel exactly span{𝟏}
/// (zero row sums and rank d−1). Its zero pattern encodes the conditional
/// independence graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    inner: SymMatrix,
}

impl PrecisionMatrix {
    /// Wraps a matrix known to lie in the cone; see
    /// [`VariogramMatrix::new_unchecked`].
    pub(crate) fn new_unchecked(a: SymMatrix) -> Self {
        PrecisionMatrix { inner: a }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.inner.matrix()[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.inner.matrix()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.inner
    }
}

/// Validates membership in the precision cone: positive semi-definite,
/// zero row sums, rank exactly d−1.
pub fn check_precision(a: &SymMatrix, psd_tol: f64) -> Result<PrecisionMatrix, MatrixError> {
    let d = a.dim();
    if d == 0 {
        return Err(MatrixError::DimensionTooSmall { d, min: 1 });
    }
    let m = a.matrix();
    let scale = m.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let mut max_row = 0.0_f64;
    for i in 0..d {
        max_row = max_row.max(m.row(i).sum().abs());
    }
    if max_row > psd_tol * scale {
        return Err(MatrixError::NonzeroRowSums { max_abs: max_row });
    }
    let (values, _) = a.eigen();
    let lmax = values[d - 1].max(0.0);
    let cut = psd_tol * lmax.max(f64::MIN_POSITIVE);
    if values[0] < -cut {
        return Err(MatrixError::NotPsd {
            eigenvalue: values[0],
        });
    }
    if d >= 2 && values[1] <= cut {
        let rank = values.iter().filter(|l| **l > cut).count();
        return Err(MatrixError::WrongRank {
            rank,
            expected: d - 1,
        });
    }
    Ok(PrecisionMatrix { inner: a.clone() })
}
