//! The exact maps between the three parameterizations of the model: the
//! variogram Γ, the degenerate covariance Σ = Π(−½Γ)Π and the precision
//! Θ = Σ⁺, plus anchored covariances, the limit representation of Θ and the
//! extremal-correlation readout.

use nalgebra::{DMatrix, DVector};

use crate::matrix::{
    pseudo_inverse, project_neg_half, MatrixError, PrecisionMatrix, SymMatrix, VariogramMatrix,
    DEFAULT_RANK_TOL,
};

/// Covariance transform γ: S ↦ 𝟏 diag(S)ᵀ + diag(S)𝟏ᵀ − 2S. The result has
/// an exactly zero diagonal for any input.
pub fn gamma_of(s: &SymMatrix) -> SymMatrix {
    let m = s.matrix();
    let d = s.dim();
    SymMatrix::symmetrize(DMatrix::from_fn(d, d, |i, j| {
        m[(i, i)] + m[(j, j)] - 2.0 * m[(i, j)]
    }))
}

/// σ: Γ ↦ Σ = Π(−½Γ)Π, the positive semi-definite representative with
/// kernel span{1}.
pub fn sigma_of(g: &VariogramMatrix) -> SymMatrix {
    project_neg_half(g.as_sym())
}

/// θ: Γ ↦ Θ = σ(Γ)⁺, the precision matrix. Membership in the precision
/// cone is guaranteed by the map, so the result is wrapped directly.
pub fn theta_of(g: &VariogramMatrix) -> PrecisionMatrix {
    PrecisionMatrix::new_unchecked(pseudo_inverse(&sigma_of(g), DEFAULT_RANK_TOL))
}

/// θ⁻¹: Θ ↦ Γ = γ(Θ⁺).
pub fn gamma_of_theta(t: &PrecisionMatrix) -> VariogramMatrix {
    let sigma = pseudo_inverse(t.as_sym(), DEFAULT_RANK_TOL);
    VariogramMatrix::new_unchecked(gamma_of(&sigma))
}

/// Positive definite covariance obtained by dropping one anchor
/// coordinate: Σ^(k) with entries ½(Γ_ik + Γ_jk − Γ_ij) over i, j ≠ k.
#[derive(Debug, Clone)]
pub struct KDroppedCovariance {
    /// The dropped (anchor) coordinate.
    pub k: usize,
    /// (d−1)×(d−1) positive definite matrix, rows/columns indexed by the
    /// original coordinates with `k` removed (ascending order).
    pub sigma_k: DMatrix<f64>,
}

impl KDroppedCovariance {
    /// Original coordinate for a row/column index of `sigma_k`.
    pub fn coordinate(&self, idx: usize) -> usize {
        if idx < self.k {
            idx
        } else {
            idx + 1
        }
    }

    /// The d×d matrix with a zero k-th row and column re-inserted.
    pub fn zero_padded(&self) -> SymMatrix {
        let d = self.sigma_k.nrows() + 1;
        let k = self.k;
        SymMatrix::symmetrize(DMatrix::from_fn(d, d, |i, j| {
            if i == k || j == k {
                0.0
            } else {
                let ii = if i < k { i } else { i - 1 };
                let jj = if j < k { j } else { j - 1 };
                self.sigma_k[(ii, jj)]
            }
        }))
    }
}

/// φ_k applied to a full variogram: the anchored covariance Σ^(k).
pub fn sigma_k(g: &VariogramMatrix, k: usize) -> KDroppedCovariance {
    let d = g.dim();
    assert!(k < d, "anchor {k} out of range for dimension {d}");
    let m = g.matrix();
    let idx: Vec<usize> = (0..d).filter(|&i| i != k).collect();
    let sigma = DMatrix::from_fn(d - 1, d - 1, |a, b| {
        let (i, j) = (idx[a], idx[b]);
        0.5 * (m[(i, k)] + m[(j, k)] - m[(i, j)])
    });
    KDroppedCovariance { k, sigma_k: sigma }
}

/// Inverts the anchored covariance and zero-pads the anchor row and column.
/// Off-anchor entries equal the precision matrix Θ; the anchor row and
/// column are padding, not Θ's values. Useful for checking that the
/// construction does not depend on the anchor.
pub fn theta_via_anchor(g: &VariogramMatrix, k: usize) -> Result<SymMatrix, MatrixError> {
    let d = g.dim();
    if d < 3 {
        return Err(MatrixError::DimensionTooSmall { d, min: 3 });
    }
    let anchored = sigma_k(g, k);
    let inv = anchored
        .sigma_k
        .clone()
        .lu()
        .try_inverse()
        .ok_or(MatrixError::Singular)?;
    let padded = KDroppedCovariance { k, sigma_k: inv };
    Ok(padded.zero_padded())
}

/// The invertible-shift representation (t𝟏𝟏ᵀ − ½Γ)⁻¹, which converges to Θ
/// as t → ∞ at rate O(1/t).
///
/// For invertible −½Γ the inverse is evaluated through the rank-one update
/// formula, which stays fully accurate when t dwarfs the matrix entries;
/// direct factorization of the shifted matrix loses log10(t) digits to
/// cancellation. The singular-shift case falls back to a pivoted LU.
pub fn theta_limit(g: &VariogramMatrix, t: f64) -> Result<SymMatrix, MatrixError> {
    let d = g.dim();
    let m = g.matrix();
    let s = m.map(|x| -0.5 * x);
    let ones = DVector::from_element(d, 1.0);
    if let Some(s_inv) = s.clone().lu().try_inverse() {
        let u = &s_inv * &ones;
        let beta = u.sum();
        let denom = 1.0 + t * beta;
        if denom.abs() <= 1e-12 * (1.0 + (t * beta).abs()) {
            return Err(MatrixError::Singular);
        }
        let update = &u * u.transpose() * (t / denom);
        return Ok(SymMatrix::symmetrize(s_inv - update));
    }
    let shifted = DMatrix::from_fn(d, d, |i, j| t - 0.5 * m[(i, j)]);
    let inv = shifted.lu().try_inverse().ok_or(MatrixError::Singular)?;
    Ok(SymMatrix::symmetrize(inv))
}

/// Standard normal cumulative distribution function, evaluated through the
/// complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Pairwise extremal correlations χ_ij = 2 − 2Φ(√Γ_ij / 2), with ones on
/// the diagonal. Entries lie in [0, 1] and decrease in Γ_ij.
pub fn chi_of_gamma(g: &VariogramMatrix) -> DMatrix<f64> {
    let d = g.dim();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            2.0 - 2.0 * std_normal_cdf(g.entry(i, j).sqrt() / 2.0)
        }
    })
}

/// Componentwise exponential, mapping exponential-margin points to
/// Pareto-margin points.
pub fn exp_margin_transform(y: &DVector<f64>) -> DVector<f64> {
    y.map(f64::exp)
}

/// Componentwise logarithm, undoing [`exp_margin_transform`]. Fails on
/// non-positive coordinates.
pub fn log_margin_transform(z: &DVector<f64>) -> Result<DVector<f64>, MatrixError> {
    if let Some(i) = (0..z.len()).find(|&i| z[i] <= 0.0) {
        return Err(MatrixError::NonPositiveOffDiagonal {
            i,
            j: i,
            value: z[i],
        });
    }
    Ok(z.map(f64::ln))
}
