//! JSON report documents emitted next to the numeric outputs.

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize)]
pub struct CompletionReportDoc {
    pub schema_version: String,
    pub command: String,
    pub dimension: usize,
    pub edge_count: usize,
    pub algorithm: String,
    pub converged: bool,
    pub iterations: usize,
    pub max_nonedge_theta: f64,
    pub theta_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub kl_trace: Vec<f64>,
    pub gamma_path: String,
    pub theta_path: String,
}

#[derive(Serialize)]
pub struct SimulateSidecarDoc {
    pub schema_version: String,
    pub command: String,
    pub dimension: usize,
    pub n: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    /// d times the acceptance rate: the implied normalizing mass.
    pub mass_estimate: f64,
    pub log_mass_estimate: f64,
    pub csv_path: String,
}

#[derive(Serialize)]
pub struct SplitReportDoc {
    pub n_train: usize,
    pub n_validation: usize,
    pub surrogate_loglik_validation: f64,
    pub pareto_loglik_validation: f64,
    pub validation_exceedances: usize,
    pub log_mass: f64,
    pub log_mass_std_error: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct FitReportDoc {
    pub schema_version: String,
    pub command: String,
    pub dimension: usize,
    pub n_observations: usize,
    pub dropped_rows: usize,
    pub p: f64,
    pub graph_spec: String,
    pub mode: String,
    pub edge_count: usize,
    pub converged: bool,
    pub iterations: usize,
    pub max_nonedge_theta: f64,
    pub surrogate_loglik_train: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReportDoc>,
    pub variable_names: Vec<String>,
    pub chi_empirical: Vec<Vec<f64>>,
    pub chi_fitted: Vec<Vec<f64>>,
    pub gamma_hat_path: String,
    pub gamma_path: String,
    pub theta_path: String,
    pub graph_path: String,
}

pub fn matrix_to_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
