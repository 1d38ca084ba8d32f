//! Variogram matrix completion on graphs: path sums on block graphs, the
//! two-clique step, the exact recursion for decomposable graphs and the
//! cyclic algorithm for general connected graphs, together with the
//! Kullback–Leibler divergence that monitors its convergence.
//!
//! The completion problem: given values on the edges of a connected graph
//! (plus a zero diagonal), find the unique variogram matrix that agrees on
//! those entries and whose precision matrix vanishes off the graph.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::graph::{
    clique_ordering, decomposable_cover, is_connected, is_decomposable, CliqueOrdering,
    CoverStrategy, GraphError, UndirectedGraph,
};
use crate::matrix::{
    check_variogram, log_pseudo_determinant, pseudo_inverse, MatrixError, PrecisionMatrix,
    SymMatrix, VariogramMatrix, DEFAULT_CND_TOL, DEFAULT_RANK_TOL,
};
use crate::transforms::{gamma_of, sigma_of, theta_of};

/// Largest tolerated magnitude of precision entries outside the graph for a
/// completion to count as converged.
pub const DEFAULT_THETA_TOL: f64 = 1e-6;

/// Default sweep budget of the cyclic algorithm.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Non-edge count up to which the naive one-graph-per-missing-edge cover is
/// used by default; beyond it the fill-in cover is preferred.
pub const AUTO_COVER_THRESHOLD: usize = 25;

#[derive(Debug, Error)]
pub enum CompletionError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph is not a block graph")]
    NotBlockGraph,
    #[error("entry ({i},{j}) does not match the graph (expected specified: {specified})")]
    SpecificationMismatch { i: usize, j: usize, specified: bool },
    #[error("principal submatrix {indices:?} is not conditionally negative definite: {source}")]
    NotPartiallyCnd {
        indices: Vec<usize>,
        source: MatrixError,
    },
    #[error("cliques do not overlap (empty separator)")]
    EmptySeparator,
    #[error("separator covariance block is not positive definite")]
    NotPd,
    #[error("initial matrix disagrees with the specified entry at ({i},{j}): {init} vs {specified}")]
    InitMismatch { i: usize, j: usize, init: f64, specified: f64 },
    #[error(transparent)]
    Invalid(#[from] MatrixError),
}

/// A symmetric matrix over ℝ ∪ {unspecified} with a zero, fully specified
/// diagonal. Houses the partially specified variograms that the completion
/// operators consume.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialVariogram {
    d: usize,
    values: DMatrix<f64>,
    mask: Vec<bool>,
}

impl PartialVariogram {
    /// A d×d partial matrix with only the (zero) diagonal specified.
    pub fn unspecified(d: usize) -> Self {
        let mut mask = vec![false; d * d];
        for i in 0..d {
            mask[i * d + i] = true;
        }
        PartialVariogram {
            d,
            values: DMatrix::zeros(d, d),
            mask,
        }
    }

    /// Fully specified partial matrix holding a valid variogram.
    pub fn from_variogram(g: &VariogramMatrix) -> Self {
        let d = g.dim();
        PartialVariogram {
            d,
            values: g.matrix().clone(),
            mask: vec![true; d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_specified(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.d + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_specified(i, j).then(|| self.values[(i, j)])
    }

    /// Sets the symmetric pair (i, j) and (j, i).
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j || value == 0.0, "diagonal entries must stay zero");
        self.values[(i, j)] = value;
        self.values[(j, i)] = value;
        self.mask[i * self.d + j] = true;
        self.mask[j * self.d + i] = true;
    }

    pub fn fully_specified(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// The graph whose edges are the specified off-diagonal pairs.
    pub fn specified_graph(&self) -> UndirectedGraph {
        let mut edges = Vec::new();
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                if self.is_specified(i, j) {
                    edges.push((i, j));
                }
            }
        }
        UndirectedGraph::new(self.d, &edges).expect("indices in range, no loops")
    }

    /// Validates a fully specified partial matrix as a variogram.
    pub fn to_variogram(&self) -> Result<VariogramMatrix, CompletionError> {
        debug_assert!(self.fully_specified());
        Ok(check_variogram(
            &SymMatrix::new(self.values.clone()).map_err(CompletionError::Invalid)?,
            DEFAULT_CND_TOL,
        )?)
    }

    /// Checks that `p` is specified on exactly the edges of `graph` (plus
    /// the diagonal).
    fn check_specified_on(&self, graph: &UndirectedGraph) -> Result<(), CompletionError> {
        if self.d != graph.num_nodes() {
            return Err(CompletionError::DimensionMismatch {
                left: self.d,
                right: graph.num_nodes(),
            });
        }
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                let need = graph.has_edge(i, j);
                if self.is_specified(i, j) != need {
                    return Err(CompletionError::SpecificationMismatch {
                        i,
                        j,
                        specified: need,
                    });
                }
            }
        }
        Ok(())
    }

    /// Validates conditional negative definiteness of the (fully specified)
    /// principal submatrix on `indices`.
    fn check_submatrix_cnd(&self, indices: &[usize]) -> Result<(), CompletionError> {
        let sub = DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.values[(indices[a], indices[b])]
        });
        let sym = SymMatrix::new(sub).map_err(|source| CompletionError::NotPartiallyCnd {
            indices: indices.to_vec(),
            source,
        })?;
        check_variogram(&sym, DEFAULT_CND_TOL).map_err(|source| {
            CompletionError::NotPartiallyCnd {
                indices: indices.to_vec(),
                source,
            }
        })?;
        Ok(())
    }
}

/// Restriction Γ|_G: entries on edges and the diagonal are kept, all others
/// become unspecified.
pub fn restrict_to_graph(
    g: &VariogramMatrix,
    graph: &UndirectedGraph,
) -> Result<PartialVariogram, CompletionError> {
    if g.dim() != graph.num_nodes() {
        return Err(CompletionError::DimensionMismatch {
            left: g.dim(),
            right: graph.num_nodes(),
        });
    }
    let mut p = PartialVariogram::unspecified(g.dim());
    for (i, j) in graph.edges() {
        p.set(i, j, g.entry(i, j));
    }
    Ok(p)
}

/// Completion result: the completed variogram, its precision matrix and the
/// convergence diagnostics of the algorithm that produced it.
#[derive(Debug, Clone)]
pub struct CompletionReport {
    pub gamma: VariogramMatrix,
    pub theta: PrecisionMatrix,
    /// Number of sweeps; the exact algorithms always use one.
    pub iterations: usize,
    /// max |Θ_ij| over pairs outside the graph (and off the diagonal).
    pub max_nonedge_theta: f64,
    pub converged: bool,
    /// Kullback–Leibler divergence between consecutive sweep iterates.
    pub kl_trace: Vec<f64>,
}

fn max_offgraph_theta(theta: &PrecisionMatrix, graph: &UndirectedGraph) -> f64 {
    let mut max = 0.0_f64;
    for (i, j) in graph.non_edges() {
        max = max.max(theta.entry(i, j).abs());
    }
    max
}

fn report_for(
    gamma: VariogramMatrix,
    graph: &UndirectedGraph,
    iterations: usize,
    theta_tol: f64,
    kl_trace: Vec<f64>,
) -> CompletionReport {
    let theta = theta_of(&gamma);
    let max_nonedge_theta = max_offgraph_theta(&theta, graph);
    CompletionReport {
        gamma,
        theta,
        iterations,
        max_nonedge_theta,
        converged: max_nonedge_theta <= theta_tol,
        kl_trace,
    }
}

/// Exact completion on a connected block graph: every missing entry is the
/// sum of the specified entries along the unique shortest path.
pub fn complete_block(
    p: &PartialVariogram,
    graph: &UndirectedGraph,
) -> Result<CompletionReport, CompletionError> {
    p.check_specified_on(graph)?;
    if !is_connected(graph) {
        return Err(CompletionError::Graph(GraphError::NotConnected));
    }
    let ordering = clique_ordering(graph)?;
    if ordering.separators.iter().any(|s| s.len() > 1) {
        return Err(CompletionError::NotBlockGraph);
    }
    for clique in &ordering.cliques {
        p.check_submatrix_cnd(clique)?;
    }

    let d = p.dim();
    let mut full = p.values.clone();
    for i in 0..d {
        // BFS from i, accumulating path sums of the specified entries.
        let mut dist = vec![f64::NAN; d];
        let mut queue = std::collections::VecDeque::from([i]);
        dist[i] = 0.0;
        while let Some(v) = queue.pop_front() {
            for w in graph.neighbors(v) {
                if dist[w].is_nan() {
                    dist[w] = dist[v] + p.get(v.min(w), v.max(w)).expect("edge specified");
                    queue.push_back(w);
                }
            }
        }
        for j in 0..d {
            full[(i, j)] = dist[j];
        }
    }
    let gamma = check_variogram(&SymMatrix::new(full)?, DEFAULT_CND_TOL)?;
    Ok(report_for(gamma, graph, 1, DEFAULT_THETA_TOL, Vec::new()))
}

/// One two-clique completion step. The cliques must cover all nodes and
/// overlap in a non-empty separator; the partial matrix must be specified
/// on both cliques. Any separator node can serve as the anchor; the result
/// does not depend on the choice, so the smallest index is used.
pub fn complete_two_clique(
    p: &PartialVariogram,
    c1: &[usize],
    c2: &[usize],
) -> Result<VariogramMatrix, CompletionError> {
    let d = p.dim();
    let mut covered = vec![false; d];
    for &v in c1.iter().chain(c2.iter()) {
        covered[v] = true;
    }
    if !covered.iter().all(|&c| c) {
        return Err(CompletionError::Graph(GraphError::NotConnected));
    }
    let separator: Vec<usize> = c1.iter().copied().filter(|v| c2.contains(v)).collect();
    if separator.is_empty() {
        return Err(CompletionError::EmptySeparator);
    }
    for clique in [c1, c2] {
        for &i in clique {
            for &j in clique {
                if i < j && !p.is_specified(i, j) {
                    return Err(CompletionError::SpecificationMismatch {
                        i,
                        j,
                        specified: true,
                    });
                }
            }
        }
    }
    p.check_submatrix_cnd(c1)?;
    p.check_submatrix_cnd(c2)?;

    let k = *separator.iter().min().expect("separator non-empty");

    // Anchored covariance entries are available exactly where the variogram
    // is, because k neighbors every node of both cliques.
    let phi = |i: usize, j: usize| {
        0.5 * (p.values[(i, k)] + p.values[(j, k)] - p.values[(i, j)])
    };
    let block_a: Vec<usize> = c1
        .iter()
        .copied()
        .filter(|v| !separator.contains(v))
        .collect();
    let block_b: Vec<usize> = separator.iter().copied().filter(|&v| v != k).collect();
    let block_c: Vec<usize> = c2
        .iter()
        .copied()
        .filter(|v| !separator.contains(v))
        .collect();

    let mut sigma = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if i != k && j != k {
                let in_c1 = c1.contains(&i) && c1.contains(&j);
                let in_c2 = c2.contains(&i) && c2.contains(&j);
                if in_c1 || in_c2 {
                    sigma[(i, j)] = phi(i, j);
                }
            }
        }
    }
    // Fill the cross block: Σ_AC = Σ_AB Σ_BB⁻¹ Σ_BC, or zero when the
    // separator is the anchor alone.
    if !block_a.is_empty() && !block_c.is_empty() {
        if block_b.is_empty() {
            // Σ_AC stays zero.
        } else {
            let nb = block_b.len();
            let bb = DMatrix::from_fn(nb, nb, |x, y| sigma[(block_b[x], block_b[y])]);
            let bb_inv = bb.lu().try_inverse().ok_or(CompletionError::NotPd)?;
            let ab = DMatrix::from_fn(block_a.len(), nb, |x, y| {
                sigma[(block_a[x], block_b[y])]
            });
            let bc = DMatrix::from_fn(nb, block_c.len(), |x, y| {
                sigma[(block_b[x], block_c[y])]
            });
            let ac = ab * bb_inv * bc;
            for (x, &i) in block_a.iter().enumerate() {
                for (y, &j) in block_c.iter().enumerate() {
                    sigma[(i, j)] = ac[(x, y)];
                    sigma[(j, i)] = ac[(x, y)];
                }
            }
        }
    }
    let gamma = gamma_of(&SymMatrix::symmetrize(sigma));
    let gamma = check_variogram(&gamma, DEFAULT_CND_TOL)?;
    // The anchored round trip reproduces specified entries only up to
    // rounding; stamping the inputs back keeps them machine-exact.
    let mut stamped = gamma.matrix().clone();
    for i in 0..d {
        for j in 0..d {
            if i != j && p.is_specified(i, j) {
                stamped[(i, j)] = p.values[(i, j)];
            }
        }
    }
    Ok(VariogramMatrix::new_unchecked(SymMatrix::symmetrize(
        stamped,
    )))
}

/// Exact completion on a connected decomposable graph: cliques are merged
/// in an order with the running intersection property, each step being a
/// two-clique completion of the already-completed node set with the next
/// clique.
pub fn complete_decomposable(
    p: &PartialVariogram,
    graph: &UndirectedGraph,
) -> Result<CompletionReport, CompletionError> {
    p.check_specified_on(graph)?;
    if !is_connected(graph) {
        return Err(CompletionError::Graph(GraphError::NotConnected));
    }
    let ordering = clique_ordering(graph)?;
    let gamma = decomposable_completion_inner(p, &ordering)?;
    Ok(report_for(gamma, graph, 1, DEFAULT_THETA_TOL, Vec::new()))
}

fn decomposable_completion_inner(
    p: &PartialVariogram,
    ordering: &CliqueOrdering,
) -> Result<VariogramMatrix, CompletionError> {
    let d = p.dim();
    for clique in &ordering.cliques {
        p.check_submatrix_cnd(clique)?;
    }
    let mut work = p.clone();
    let mut known: Vec<usize> = ordering.cliques[0].clone();
    for clique in ordering.cliques.iter().skip(1) {
        let mut union: Vec<usize> = known.clone();
        for &v in clique {
            if !union.contains(&v) {
                union.push(v);
            }
        }
        union.sort_unstable();

        // Local completion problem on the union, with the already-known
        // set and the incoming clique as the two cliques.
        let local_of = |v: usize| union.iter().position(|&u| u == v).expect("member");
        let mut local = PartialVariogram::unspecified(union.len());
        for (a, &i) in union.iter().enumerate() {
            for (b, &j) in union.iter().enumerate() {
                if a < b {
                    let both_known = known.contains(&i) && known.contains(&j);
                    let both_new = clique.contains(&i) && clique.contains(&j);
                    if both_known || both_new {
                        local.set(a, b, work.values[(i, j)]);
                    }
                }
            }
        }
        let local_c1: Vec<usize> = known.iter().map(|&v| local_of(v)).collect();
        let local_c2: Vec<usize> = clique.iter().map(|&v| local_of(v)).collect();
        let completed = complete_two_clique(&local, &local_c1, &local_c2)?;
        for (a, &i) in union.iter().enumerate() {
            for (b, &j) in union.iter().enumerate() {
                if a < b {
                    work.set(i, j, completed.entry(a, b));
                }
            }
        }
        known = union;
    }
    debug_assert_eq!(known.len(), d);
    work.to_variogram()
}

/// Options of the cyclic completion algorithm for general connected graphs.
#[derive(Debug, Clone)]
pub struct IterationOptions {
    /// Convergence threshold on max |Θ_ij| outside the graph.
    pub theta_tol: f64,
    /// Sweep budget; one sweep runs once through the whole cover.
    pub max_iter: usize,
    /// Cover construction; `None` picks one-per-nonedge for up to
    /// [`AUTO_COVER_THRESHOLD`] missing edges and fill-in beyond.
    pub cover: Option<CoverStrategy>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            theta_tol: DEFAULT_THETA_TOL,
            max_iter: DEFAULT_MAX_ITER,
            cover: None,
        }
    }
}

/// Cyclic completion on a general connected graph. Starting from a valid
/// variogram that agrees with the specified entries, the iteration
/// completes the current matrix on each member of a decomposable cover in
/// turn; the iterates converge to the unique graph-structured completion.
///
/// A sweep budget exhaustion is not an error: the best iterate is returned
/// with `converged == false`.
pub fn complete_general(
    p: &PartialVariogram,
    graph: &UndirectedGraph,
    init: &VariogramMatrix,
    opts: &IterationOptions,
) -> Result<CompletionReport, CompletionError> {
    p.check_specified_on(graph)?;
    if !is_connected(graph) {
        return Err(CompletionError::Graph(GraphError::NotConnected));
    }
    if init.dim() != p.dim() {
        return Err(CompletionError::DimensionMismatch {
            left: init.dim(),
            right: p.dim(),
        });
    }
    let scale = init.matrix().amax().max(1.0);
    for (i, j) in graph.edges() {
        let specified = p.get(i, j).expect("specified on the graph");
        if (init.entry(i, j) - specified).abs() > 1e-12 * scale {
            return Err(CompletionError::InitMismatch {
                i,
                j,
                init: init.entry(i, j),
                specified,
            });
        }
    }
    if graph.is_complete() {
        return Ok(report_for(
            init.clone(),
            graph,
            1,
            opts.theta_tol,
            Vec::new(),
        ));
    }

    // A decomposable graph is its own (exact) cover.
    let cover = if is_decomposable(graph) {
        vec![graph.clone()]
    } else {
        let strategy = opts.cover.unwrap_or_else(|| {
            if graph.non_edges().len() <= AUTO_COVER_THRESHOLD {
                CoverStrategy::OnePerNonedge
            } else {
                CoverStrategy::FillIn
            }
        });
        decomposable_cover(graph, strategy)?
    };
    let orderings: Vec<CliqueOrdering> = cover
        .iter()
        .map(clique_ordering)
        .collect::<Result<_, _>>()?;

    let mut current = init.clone();
    let mut kl_trace = Vec::new();
    let mut iterations = 0usize;
    let mut best = report_for(current.clone(), graph, 0, opts.theta_tol, Vec::new());
    while iterations < opts.max_iter {
        iterations += 1;
        let previous = current.clone();
        for (member, ordering) in cover.iter().zip(&orderings) {
            let restricted = restrict_to_graph(&current, member)?;
            current = decomposable_completion_inner(&restricted, ordering)?;
        }
        // Specified entries are inputs of every sub-completion, but
        // re-stamping keeps them exact against drift.
        let mut stamped = current.matrix().clone();
        for (i, j) in graph.edges() {
            let v = p.get(i, j).expect("specified on the graph");
            stamped[(i, j)] = v;
            stamped[(j, i)] = v;
        }
        current = VariogramMatrix::new_unchecked(SymMatrix::symmetrize(stamped));

        kl_trace.push(kl_divergence(&previous, &current)?);
        let report = report_for(current.clone(), graph, iterations, opts.theta_tol, Vec::new());
        let improved = report.max_nonedge_theta <= best.max_nonedge_theta || iterations == 1;
        if improved {
            best = report;
        }
        if best.converged {
            break;
        }
    }
    best.kl_trace = kl_trace;
    best.iterations = iterations;
    Ok(best)
}

/// Kullback–Leibler divergence between the degenerate Gaussian laws on
/// {𝟏}⊥ associated with two variograms:
/// 𝓘(Γ₁|Γ₂) = −½(log|Σ₂⁺Σ₁|₊ + d − 1 − tr(Σ₂⁺Σ₁)).
pub fn kl_divergence(g1: &VariogramMatrix, g2: &VariogramMatrix) -> Result<f64, CompletionError> {
    if g1.dim() != g2.dim() {
        return Err(CompletionError::DimensionMismatch {
            left: g1.dim(),
            right: g2.dim(),
        });
    }
    let d = g1.dim();
    let s1 = sigma_of(g1);
    let s2 = sigma_of(g2);
    // |Σ₂⁺Σ₁|₊ factors over the shared kernel, so it is evaluated in log
    // space as the difference of the pseudo-log-determinants.
    let log_det = log_pseudo_determinant(&s1, DEFAULT_RANK_TOL)
        - log_pseudo_determinant(&s2, DEFAULT_RANK_TOL);
    let s2_pinv = pseudo_inverse(&s2, DEFAULT_RANK_TOL);
    let trace = (s2_pinv.matrix() * s1.matrix()).trace();
    Ok(-0.5 * (log_det + (d as f64) - 1.0 - trace))
}

/// Outcome of the completability screening.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// The specified entries violate the metric bounds implied by their own
    /// paths: √Γ̊_ij must lie within [lower, upper].
    Infeasible {
        i: usize,
        j: usize,
        lower: f64,
        upper: f64,
        value: f64,
    },
    /// Screening found no obstruction. Completability is not guaranteed;
    /// the authoritative failure signal is non-convergence of the cyclic
    /// algorithm.
    Unknown,
}

/// Triangle-inequality screening of a partial variogram, using its
/// interpretation as a partial matrix of squared Euclidean distances.
/// Shortest specified paths bound every specified chord from above, and
/// reverse triangles bound it from below.
pub fn detect_noncompletable(p: &PartialVariogram, graph: &UndirectedGraph) -> Feasibility {
    let d = p.dim();
    let dist_entry = |i: usize, j: usize| p.get(i, j).map(f64::sqrt);
    let scale = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter_map(|(i, j)| dist_entry(i, j))
        .fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;

    // All-pairs shortest paths over the specified entries.
    let mut dist = DMatrix::from_element(d, d, f64::INFINITY);
    for i in 0..d {
        dist[(i, i)] = 0.0;
        for j in 0..d {
            if i != j {
                if let Some(v) = dist_entry(i, j) {
                    dist[(i, j)] = v;
                }
            }
        }
    }
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let via = dist[(i, k)] + dist[(k, j)];
                if via < dist[(i, j)] {
                    dist[(i, j)] = via;
                }
            }
        }
    }
    for (i, j) in graph.edges() {
        let Some(direct) = dist_entry(i, j) else {
            continue;
        };
        if dist[(i, j)] < direct - tol {
            return Feasibility::Infeasible {
                i,
                j,
                lower: 0.0,
                upper: dist[(i, j)],
                value: direct,
            };
        }
        for k in 0..d {
            if k == i || k == j {
                continue;
            }
            let (Some(a), Some(b)) = (dist_entry(i, k), dist_entry(j, k)) else {
                continue;
            };
            if direct < (a - b).abs() - tol {
                return Feasibility::Infeasible {
                    i,
                    j,
                    lower: (a - b).abs(),
                    upper: a + b,
                    value: direct,
                };
            }
        }
    }
    Feasibility::Unknown
}
