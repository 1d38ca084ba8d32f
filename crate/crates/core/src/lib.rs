//! Hüsler–Reiss extremal graphical models: parameter-matrix calculus,
//! variogram matrix completion on graphs, exact simulation and estimation.
//!
//! The model of a d-variate extremal dependence structure is a variogram
//! matrix Γ (symmetric, zero diagonal, strictly conditionally negative
//! definite). Its precision matrix Θ = (Π(−½Γ)Π)⁺ is positive semi-definite
//! with kernel span{1}, and its zero pattern is the conditional independence
//! graph. The crate provides
//!
//! - [`matrix`]: pseudo-inverse / pseudo-determinant kernels and the
//!   validated cone types,
//! - [`graph`]: chordal graph machinery (cliques, separators, covers),
//! - [`transforms`]: the exact maps between Γ, Σ and Θ,
//! - [`completion`]: matrix completion on block, decomposable and general
//!   connected graphs,
//! - [`density`]: exponent-measure densities and likelihoods,
//! - [`simulate`]: exact sampling of the associated Pareto vectors,
//! - [`estimate`]: empirical variograms, extremal correlation, spanning
//!   trees and graph-structured fitting.

pub mod completion;
pub mod density;
pub mod estimate;
pub mod graph;
pub mod matrix;
pub mod simulate;
pub mod transforms;

pub use completion::{
    complete_block, complete_decomposable, complete_general, complete_two_clique,
    detect_noncompletable, kl_divergence, restrict_to_graph, CompletionError, CompletionReport,
    Feasibility, IterationOptions, PartialVariogram,
};
pub use density::{
    check_mle_stationarity, log_lambda_anchor, log_lambda_theta, log_mass_l, pareto_loglik,
    surrogate_loglik, DensityConstants, DensityError, LogMassEstimate,
};
pub use estimate::{
    cliquewise_variogram, empirical_chi, empirical_variogram, fit_graph_structured, learn_tree,
    minimum_spanning_tree, rank_transform, EmpiricalVariogram, EstimationError, ExceedanceSample,
    FitMode, MarginTag,
};
pub use graph::{
    clique_ordering, decomposable_cover, graph_laplacian, is_block_graph, is_connected,
    is_decomposable, maximal_cliques, CliqueOrdering, CoverStrategy, GraphError, UndirectedGraph,
};
pub use matrix::{
    centering_projector, check_precision, check_variogram, log_pseudo_determinant,
    pseudo_determinant, pseudo_inverse, MatrixError, PrecisionMatrix, SymMatrix, VariogramMatrix,
    DEFAULT_CND_TOL, DEFAULT_PSD_TOL, DEFAULT_RANK_TOL,
};
pub use simulate::{
    sample_anchor, sample_degenerate_gaussian, sample_pareto, AnchorSampler, SamplerConfig,
    SimulationError,
};
pub use transforms::{
    chi_of_gamma, exp_margin_transform, gamma_of, gamma_of_theta, log_margin_transform, sigma_k,
    sigma_of, std_normal_cdf, theta_limit, theta_of, theta_via_anchor, KDroppedCovariance,
};
