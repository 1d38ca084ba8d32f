//! Exponent-measure density evaluation in the anchored and the
//! precision-matrix parameterizations, the surrogate log-likelihood, the
//! Monte-Carlo normalizing mass and the stationarity certificate for
//! graph-constrained maximum likelihood.
//!
//! All evaluation happens in log space.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::estimate::ExceedanceSample;
use crate::graph::UndirectedGraph;
use crate::matrix::{
    log_pseudo_determinant, pseudo_inverse, PrecisionMatrix, SymMatrix, VariogramMatrix,
    DEFAULT_RANK_TOL,
};
use crate::simulate::AnchorSampler;
use crate::transforms::{gamma_of, sigma_k, theta_of};

const LOG_TWO_PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("row {row} lies outside the support (all coordinates non-positive)")]
    NotInSupport { row: usize },
}

/// Cached constants of the precision-form density
/// λ(y) = c₁·c₂·exp(−½yᵀΘy + yᵀr − yᵀe_d): the log prefactors, the linear
/// coefficient r = −½ΘΓe_d and e_d = 𝟏/d. Rebuild on any change of Γ.
#[derive(Debug, Clone)]
pub struct DensityConstants {
    pub log_c1: f64,
    pub log_c2: f64,
    pub r_theta: DVector<f64>,
    pub e_d: DVector<f64>,
    theta: PrecisionMatrix,
}

impl DensityConstants {
    pub fn new(g: &VariogramMatrix) -> Self {
        let d = g.dim();
        let theta = theta_of(g);
        let e_d = DVector::from_element(d, 1.0 / d as f64);
        let gamma_e = g.matrix() * &e_d;
        let r_theta = -0.5 * (theta.matrix() * &gamma_e);
        let log_det = log_pseudo_determinant(theta.as_sym(), DEFAULT_RANK_TOL);
        let log_c1 =
            -0.5 * (d as f64 - 1.0) * LOG_TWO_PI + 0.5 * (log_det - (d as f64).ln());
        // c₂ = exp(−⅛ e_dᵀ(ΓΘΓ + 2Γ)e_d)
        let theta_gamma_e = theta.matrix() * &gamma_e;
        let quad = gamma_e.dot(&theta_gamma_e) + 2.0 * e_d.dot(&gamma_e);
        let log_c2 = -0.125 * quad;
        DensityConstants {
            log_c1,
            log_c2,
            r_theta,
            e_d,
            theta,
        }
    }

    pub fn theta(&self) -> &PrecisionMatrix {
        &self.theta
    }

    pub fn c1(&self) -> f64 {
        self.log_c1.exp()
    }

    pub fn c2(&self) -> f64 {
        self.log_c2.exp()
    }

    /// log λ(y) in the precision-matrix form.
    pub fn log_lambda(&self, y: &DVector<f64>) -> f64 {
        let ty = self.theta.matrix() * y;
        self.log_c1 + self.log_c2 - 0.5 * y.dot(&ty) + y.dot(&self.r_theta)
            - y.dot(&self.e_d)
    }
}

/// log λ(y) through the anchored form: the anchor coordinate is
/// exponential, the remaining coordinates are Gaussian increments around
/// it. The value does not depend on the choice of anchor.
pub fn log_lambda_anchor(y: &DVector<f64>, g: &VariogramMatrix, k: usize) -> f64 {
    let d = g.dim();
    assert!(k < d, "anchor {k} out of range for dimension {d}");
    if d == 1 {
        return -y[0];
    }
    let dropped = sigma_k(g, k);
    let det = dropped
        .sigma_k
        .clone()
        .lu()
        .determinant();
    let theta_k = dropped
        .sigma_k
        .clone()
        .try_inverse()
        .expect("anchored covariance of a valid variogram is positive definite");
    let centered = DVector::from_fn(d - 1, |i, _| {
        let orig = dropped.coordinate(i);
        y[orig] - y[k] + 0.5 * g.entry(orig, k)
    });
    let quad = centered.dot(&(&theta_k * &centered));
    -y[k] - 0.5 * ((d as f64 - 1.0) * LOG_TWO_PI + det.ln()) - 0.5 * quad
}

/// log λ(y) in the precision-matrix form. For repeated evaluation build
/// [`DensityConstants`] once instead.
pub fn log_lambda_theta(y: &DVector<f64>, g: &VariogramMatrix) -> f64 {
    DensityConstants::new(g).log_lambda(y)
}

/// The graph-constrained surrogate log-likelihood
/// f(Θ) = log|Θ|₊ + ½ tr(Γ̄Θ). The plug-in matrix needs a zero diagonal and
/// symmetry but no definiteness.
pub fn surrogate_loglik(gamma_bar: &SymMatrix, t: &PrecisionMatrix) -> f64 {
    let log_det = log_pseudo_determinant(t.as_sym(), DEFAULT_RANK_TOL);
    let mut trace = 0.0;
    let gm = gamma_bar.matrix();
    let tm = t.matrix();
    for i in 0..gamma_bar.dim() {
        for j in 0..gamma_bar.dim() {
            trace += gm[(i, j)] * tm[(i, j)];
        }
    }
    log_det + 0.5 * trace
}

/// Certificate that `completed` maximizes the surrogate likelihood of
/// `gamma_bar` under the graph constraint: the stationarity condition
/// requires γ(Θ⁺) to match `gamma_bar` on every edge. Returns the largest
/// edge residual after the full round trip through Θ.
pub fn check_mle_stationarity(
    gamma_bar: &VariogramMatrix,
    graph: &UndirectedGraph,
    completed: &VariogramMatrix,
) -> f64 {
    let theta = theta_of(completed);
    let sigma = pseudo_inverse(theta.as_sym(), DEFAULT_RANK_TOL);
    let gamma_round = gamma_of(&sigma);
    let mut max = 0.0_f64;
    for (i, j) in graph.edges() {
        max = max.max((gamma_round.matrix()[(i, j)] - gamma_bar.entry(i, j)).abs());
    }
    max
}

/// Monte-Carlo estimate of the normalizing mass Λᶜ(𝟎) of the Pareto
/// density, via the identity Λᶜ(𝟎) = d · P(accept) of the rejection
/// sampler.
#[derive(Debug, Clone)]
pub struct LogMassEstimate {
    pub log_mass: f64,
    pub mass: f64,
    /// Standard error of `mass` (binomial).
    pub std_error: f64,
    pub n_proposals: usize,
}

/// Estimates log Λᶜ(𝟎) from `n_mc` rejection trials with a reproducible
/// seed.
pub fn log_mass_l(g: &VariogramMatrix, n_mc: usize, seed: u64) -> LogMassEstimate {
    let sampler = AnchorSampler::new(g);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut accepted = 0usize;
    for _ in 0..n_mc {
        if sampler.trial(&mut rng).is_some() {
            accepted += 1;
        }
    }
    let d = g.dim() as f64;
    let p_hat = accepted as f64 / n_mc as f64;
    let mass = d * p_hat;
    let std_error = d * (p_hat * (1.0 - p_hat) / n_mc as f64).sqrt();
    LogMassEstimate {
        log_mass: mass.ln(),
        mass,
        std_error,
        n_proposals: n_mc,
    }
}

/// Pareto log-likelihood of a sample in exponential-scale coordinates:
/// Σ_rows log λ(y_row) − n·log Λᶜ(𝟎). Rows must intersect the support
/// {y ≰ 𝟎}.
pub fn pareto_loglik(
    data: &ExceedanceSample,
    g: &VariogramMatrix,
    log_mass: f64,
) -> Result<f64, DensityError> {
    let constants = DensityConstants::new(g);
    let mut total = 0.0;
    for r in 0..data.len() {
        let row = data.values().row(r).transpose();
        if row.iter().all(|&v| v <= 0.0) {
            return Err(DensityError::NotInSupport { row: r });
        }
        total += constants.log_lambda(&row) - log_mass;
    }
    Ok(total)
}
