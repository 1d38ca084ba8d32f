//! Data-side estimators: rank transform to standard exponential margins,
//! empirical extremal correlation, the anchor-averaged empirical variogram,
//! clique-wise estimation for sparse graphs, minimum spanning trees and the
//! graph-structured estimator obtained by completing the empirical
//! variogram's restriction.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::completion::{
    complete_decomposable, complete_general, restrict_to_graph, CompletionError,
    CompletionReport, IterationOptions, PartialVariogram,
};
use crate::graph::{is_connected, is_decomposable, maximal_cliques, GraphError, UndirectedGraph};
use crate::matrix::{check_variogram, MatrixError, SymMatrix, DEFAULT_CND_TOL};
use crate::transforms::gamma_of;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("column {col} is constant, rank transform undefined")]
    DegenerateColumn { col: usize },
    #[error("anchor {anchor} has {count} exceedances, need at least {need}")]
    TooFewExceedances {
        anchor: usize,
        count: usize,
        need: usize,
    },
    #[error("data carries raw margins; apply the rank transform first")]
    RawMargins,
    #[error("probability threshold {p} outside (0, 1)")]
    InvalidThreshold { p: f64 },
    #[error("clique-wise estimation on a non-decomposable graph needs the full estimator as initializer")]
    NeedsFullInit,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error("empirical variogram is not a valid variogram matrix: {0}")]
    InvalidEstimate(MatrixError),
}

/// Marginal scale of an observation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginTag {
    /// As read from disk; margins unknown.
    Raw,
    /// Standard exponential margins produced by the rank transform of bulk
    /// data; tail events are selected by empirical quantiles.
    Exponential,
    /// Exact draws of the limit distribution (exponential-scale support);
    /// the anchor events are simply {y_k > 0}.
    ExactPareto,
}

/// An n×d observation matrix with its marginal scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceSample {
    values: DMatrix<f64>,
    margin: MarginTag,
}

impl ExceedanceSample {
    pub fn new(values: DMatrix<f64>, margin: MarginTag) -> Self {
        ExceedanceSample { values, margin }
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn margin(&self) -> MarginTag {
        self.margin
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Column-subset view as a new sample with the same margins.
    pub fn select_columns(&self, cols: &[usize]) -> ExceedanceSample {
        let sub = DMatrix::from_fn(self.len(), cols.len(), |r, c| self.values[(r, cols[c])]);
        ExceedanceSample {
            values: sub,
            margin: self.margin,
        }
    }
}

/// Average ranks (ties averaged), 1-based.
fn average_ranks(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // mean of 1-based positions i+1..=j+1
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Normalizes every column to the standard exponential scale through its
/// empirical distribution function: y = −log(1 − rank/(n+1)).
pub fn rank_transform(raw: &ExceedanceSample) -> Result<ExceedanceSample, EstimationError> {
    let n = raw.len();
    let d = raw.dim();
    let mut out = DMatrix::zeros(n, d);
    for c in 0..d {
        let column: Vec<f64> = raw.values.column(c).iter().copied().collect();
        let (min, max) = column
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if min == max {
            return Err(EstimationError::DegenerateColumn { col: c });
        }
        let ranks = average_ranks(&column);
        for r in 0..n {
            out[(r, c)] = -(1.0 - ranks[r] / (n as f64 + 1.0)).ln();
        }
    }
    Ok(ExceedanceSample::new(out, MarginTag::Exponential))
}

/// Indices of the m rows with the largest values in a column, ties broken
/// by row order. Deterministic regardless of input order.
fn top_rows(column: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[b].total_cmp(&column[a]).then(a.cmp(&b)));
    order.truncate(m);
    order
}

fn exceedance_count(n: usize, p: f64) -> Result<usize, EstimationError> {
    if !(0.0 < p && p < 1.0) {
        return Err(EstimationError::InvalidThreshold { p });
    }
    Ok(((n as f64) * (1.0 - p)).floor() as usize)
}

/// Rows that form the anchor event for coordinate k: exact samples use
/// {y_k > 0}, rank-transformed data uses the top ⌊n(1−p)⌋ rows by column k.
fn anchor_rows(
    y: &ExceedanceSample,
    k: usize,
    p: f64,
) -> Result<Vec<usize>, EstimationError> {
    match y.margin() {
        MarginTag::Raw => Err(EstimationError::RawMargins),
        MarginTag::ExactPareto => Ok((0..y.len())
            .filter(|&r| y.values[(r, k)] > 0.0)
            .collect()),
        MarginTag::Exponential => {
            let m = exceedance_count(y.len(), p)?;
            let column: Vec<f64> = y.values.column(k).iter().copied().collect();
            Ok(top_rows(&column, m))
        }
    }
}

/// The anchor-averaged empirical variogram together with the threshold and
/// the per-anchor exceedance counts. The estimate is symmetric with zero
/// diagonal and non-negative entries but need not lie in the variogram
/// cone.
#[derive(Debug, Clone)]
pub struct EmpiricalVariogram {
    pub gamma_hat: SymMatrix,
    pub p: f64,
    pub counts: Vec<usize>,
}

/// Empirical variogram: for every anchor k, the empirical covariance of the
/// increments (y_i − y_k) over the anchor exceedances, mapped through the
/// covariance transform and averaged over anchors.
///
/// Exact model samples condition on {y_k > 0} and ignore `p`;
/// rank-transformed data conditions on the top ⌊n(1−p)⌋ rows per anchor.
pub fn empirical_variogram(
    y: &ExceedanceSample,
    p: f64,
) -> Result<EmpiricalVariogram, EstimationError> {
    let d = y.dim();
    let mut acc = DMatrix::zeros(d, d);
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let rows = anchor_rows(y, k, p)?;
        let m = rows.len();
        if m < 2 {
            return Err(EstimationError::TooFewExceedances {
                anchor: k,
                count: m,
                need: 2,
            });
        }
        counts.push(m);
        // covariance of increments over coordinates != k, zero-padded at k
        let others: Vec<usize> = (0..d).filter(|&i| i != k).collect();
        let mut mean = vec![0.0f64; d - 1];
        for &r in &rows {
            for (a, &i) in others.iter().enumerate() {
                mean[a] += y.values[(r, i)] - y.values[(r, k)];
            }
        }
        for v in &mut mean {
            *v /= m as f64;
        }
        let mut cov = DMatrix::zeros(d, d);
        for &r in &rows {
            for (a, &i) in others.iter().enumerate() {
                let da = y.values[(r, i)] - y.values[(r, k)] - mean[a];
                for (b, &j) in others.iter().enumerate().skip(a) {
                    let db = y.values[(r, j)] - y.values[(r, k)] - mean[b];
                    cov[(i, j)] += da * db;
                }
            }
        }
        let denom = (m - 1) as f64;
        for (a, &i) in others.iter().enumerate() {
            for &j in others.iter().skip(a) {
                cov[(i, j)] /= denom;
                cov[(j, i)] = cov[(i, j)];
            }
        }
        acc += gamma_of(&SymMatrix::symmetrize(cov)).matrix();
    }
    acc /= d as f64;
    Ok(EmpiricalVariogram {
        gamma_hat: SymMatrix::symmetrize(acc),
        p,
        counts,
    })
}

/// Empirical extremal correlation matrix at threshold p: the fraction of
/// joint exceedances among the top ⌊n(1−p)⌋ rows of each column. Rank-based
/// and therefore symmetric and margin-free.
pub fn empirical_chi(y: &ExceedanceSample, p: f64) -> Result<DMatrix<f64>, EstimationError> {
    let n = y.len();
    let d = y.dim();
    let m = exceedance_count(n, p)?;
    if m == 0 {
        return Err(EstimationError::TooFewExceedances {
            anchor: 0,
            count: 0,
            need: 1,
        });
    }
    let mut exceed = vec![vec![false; n]; d];
    for (c, flags) in exceed.iter_mut().enumerate() {
        let column: Vec<f64> = y.values.column(c).iter().copied().collect();
        for r in top_rows(&column, m) {
            flags[r] = true;
        }
    }
    let mut chi = DMatrix::from_element(d, d, 1.0);
    for i in 0..d {
        for j in (i + 1)..d {
            let joint = (0..n).filter(|&r| exceed[i][r] && exceed[j][r]).count();
            let value = joint as f64 / m as f64;
            chi[(i, j)] = value;
            chi[(j, i)] = value;
        }
    }
    Ok(chi)
}

/// Clique-wise empirical variogram: the estimator is run on each maximal
/// clique's columns separately and edge entries are averaged over the
/// cliques containing them. Entries outside the graph stay unspecified.
/// Cheap for sparse graphs, but the result is not guaranteed to be a valid
/// partial variogram at finite sample sizes.
pub fn cliquewise_variogram(
    y: &ExceedanceSample,
    graph: &UndirectedGraph,
    p: f64,
) -> Result<PartialVariogram, EstimationError> {
    if !is_connected(graph) {
        return Err(EstimationError::Graph(GraphError::NotConnected));
    }
    let d = y.dim();
    let mut sums = DMatrix::<f64>::zeros(d, d);
    let mut hits = DMatrix::<u32>::zeros(d, d);
    for clique in maximal_cliques(graph) {
        let sub = y.select_columns(&clique);
        let est = empirical_variogram(&sub, p)?;
        for (a, &i) in clique.iter().enumerate() {
            for (b, &j) in clique.iter().enumerate() {
                if a < b {
                    sums[(i, j)] += est.gamma_hat.matrix()[(a, b)];
                    hits[(i, j)] += 1;
                }
            }
        }
    }
    let mut out = PartialVariogram::unspecified(d);
    for (i, j) in graph.edges() {
        debug_assert!(hits[(i, j)] > 0, "every edge lies in a maximal clique");
        out.set(i, j, sums[(i, j)] / hits[(i, j)] as f64);
    }
    Ok(out)
}

/// Minimum spanning tree of the complete graph under the given symmetric
/// weights (Kruskal, ties broken lexicographically). All weights must be
/// finite.
pub fn minimum_spanning_tree(weights: &SymMatrix) -> UndirectedGraph {
    let d = weights.dim();
    let w = weights.matrix();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            assert!(w[(i, j)].is_finite(), "weights must be finite");
            pairs.push((i, j));
        }
    }
    pairs.sort_by(|&(a, b), &(c, e)| w[(a, b)].total_cmp(&w[(c, e)]).then((a, b).cmp(&(c, e))));
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut edges = Vec::with_capacity(d.saturating_sub(1));
    for (i, j) in pairs {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            edges.push((i, j));
            if edges.len() == d - 1 {
                break;
            }
        }
    }
    UndirectedGraph::new(d, &edges).expect("valid tree edges")
}

/// Structure learning by the minimum spanning tree with the empirical
/// variogram as weights.
pub fn learn_tree(gamma_hat: &EmpiricalVariogram) -> UndirectedGraph {
    minimum_spanning_tree(&gamma_hat.gamma_hat)
}

/// Which estimator feeds the graph-structured fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Full empirical variogram; any connected graph.
    Full,
    /// Clique-wise estimation; restricted to decomposable graphs, where the
    /// exact completion needs no initializer.
    Cliquewise,
}

/// The graph-structured estimator: the completion of the (restricted)
/// empirical variogram on the given connected graph. In full mode the
/// empirical variogram itself initializes the cyclic algorithm on
/// non-decomposable graphs.
pub fn fit_graph_structured(
    y: &ExceedanceSample,
    graph: &UndirectedGraph,
    p: f64,
    mode: FitMode,
    opts: &IterationOptions,
) -> Result<CompletionReport, EstimationError> {
    if !is_connected(graph) {
        return Err(EstimationError::Graph(GraphError::NotConnected));
    }
    match mode {
        FitMode::Full => {
            let est = empirical_variogram(y, p)?;
            let gamma_hat = check_variogram(&est.gamma_hat, DEFAULT_CND_TOL)
                .map_err(EstimationError::InvalidEstimate)?;
            let restricted = restrict_to_graph(&gamma_hat, graph)?;
            if is_decomposable(graph) {
                Ok(complete_decomposable(&restricted, graph)?)
            } else {
                Ok(complete_general(&restricted, graph, &gamma_hat, opts)?)
            }
        }
        FitMode::Cliquewise => {
            if !is_decomposable(graph) {
                return Err(EstimationError::NeedsFullInit);
            }
            let partial = cliquewise_variogram(y, graph, p)?;
            Ok(complete_decomposable(&partial, graph)?)
        }
    }
}
