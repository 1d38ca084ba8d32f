//! Shared fixtures and oracles for the integration tests: the golden
//! instances, random generators for variograms and connected graphs, and a
//! quadrature oracle for the bivariate normalizing mass.

#![allow(dead_code)]

use hrx_core::{
    check_precision, check_variogram, PartialVariogram, PrecisionMatrix, SymMatrix,
    UndirectedGraph, VariogramMatrix, DEFAULT_CND_TOL, DEFAULT_PSD_TOL,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn variogram_from_rows(d: usize, rows: &[f64]) -> VariogramMatrix {
    let m = DMatrix::from_row_slice(d, d, rows);
    check_variogram(&SymMatrix::new(m).unwrap(), DEFAULT_CND_TOL).unwrap()
}

/// Precision matrix from printed (rounded) values: off-diagonal entries are
/// taken as printed, the diagonal is re-derived so that rows sum to zero.
pub fn precision_from_printed(d: usize, rows: &[f64]) -> PrecisionMatrix {
    let mut m = DMatrix::from_row_slice(d, d, rows);
    for i in 0..d {
        let off: f64 = (0..d).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -off;
    }
    check_precision(&SymMatrix::new(m).unwrap(), DEFAULT_PSD_TOL).unwrap()
}

/// Five-node golden instance: a non-decomposable graph (one chordless
/// square plus a pendant triangle fan) with a printed initial matrix and
/// its graph-structured completion, rounded to two decimals.
pub struct GoldenGeneral {
    pub graph: UndirectedGraph,
    pub gamma0: VariogramMatrix,
    pub completed_nonedges: Vec<((usize, usize), f64)>,
    pub nonedges_square: Vec<(usize, usize)>,
    pub nonedges_fast: Vec<(usize, usize)>,
}

pub fn golden_general() -> GoldenGeneral {
    let graph = UndirectedGraph::new(
        5,
        &[(0, 1), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4)],
    )
    .unwrap();
    let gamma0 = variogram_from_rows(
        5,
        &[
            0.0, 0.23, 0.08, 0.09, 0.21, //
            0.23, 0.0, 0.14, 0.23, 0.19, //
            0.08, 0.14, 0.0, 0.11, 0.20, //
            0.09, 0.23, 0.11, 0.0, 0.16, //
            0.21, 0.19, 0.20, 0.16, 0.0,
        ],
    );
    GoldenGeneral {
        graph,
        gamma0,
        completed_nonedges: vec![
            ((0, 2), 0.17),
            ((1, 3), 0.20),
            ((1, 4), 0.35),
            ((2, 4), 0.26),
        ],
        nonedges_square: vec![(0, 2), (1, 3)],
        nonedges_fast: vec![(1, 4), (2, 4)],
    }
}

/// Four-node block-graph instance with integer path sums.
pub struct GoldenBlock {
    pub graph: UndirectedGraph,
    pub partial: PartialVariogram,
    pub gamma13: f64,
    pub gamma34: f64,
}

pub fn golden_block() -> GoldenBlock {
    let graph = UndirectedGraph::new(4, &[(0, 1), (0, 3), (1, 2), (1, 3)]).unwrap();
    let mut partial = PartialVariogram::unspecified(4);
    partial.set(0, 1, 3.0);
    partial.set(0, 3, 1.0);
    partial.set(1, 2, 10.0);
    partial.set(1, 3, 2.0);
    GoldenBlock {
        graph,
        partial,
        gamma13: 13.0,
        gamma34: 12.0,
    }
}

/// Non-completable ring: unit squared distances along the cycle and an
/// oversized chord (2d)² closing it.
pub fn infeasible_ring(d: usize) -> (PartialVariogram, UndirectedGraph) {
    let mut edges: Vec<(usize, usize)> = (0..d - 1).map(|i| (i, i + 1)).collect();
    edges.push((0, d - 1));
    let graph = UndirectedGraph::new(d, &edges).unwrap();
    let mut p = PartialVariogram::unspecified(d);
    for i in 0..d - 1 {
        p.set(i, i + 1, 1.0);
    }
    p.set(0, d - 1, ((2 * d) * (2 * d)) as f64);
    (p, graph)
}

/// Published six-dimensional precision matrix of the simulation study,
/// diagonal re-derived from the printed off-diagonal entries.
pub fn theta_d6() -> PrecisionMatrix {
    precision_from_printed(
        6,
        &[
            10.06, -4.09, -1.65, -5.51, 2.37, -1.17, //
            -4.09, 4.09, 0.0, 0.0, 0.0, 0.0, //
            -1.65, 0.0, 11.78, -9.10, -1.69, 0.65, //
            -5.51, 0.0, -9.10, 32.21, -4.94, -12.66, //
            2.37, 0.0, -1.69, -4.94, 4.27, 0.0, //
            -1.17, 0.0, 0.65, -12.66, 0.0, 13.19,
        ],
    )
}

/// Published ten-dimensional precision matrix of the simulation study.
pub fn theta_d10() -> PrecisionMatrix {
    precision_from_printed(
        10,
        &[
            24.15, -3.95, 2.45, -10.61, -1.42, -4.85, -4.51, -1.25, 0.0, 0.0, //
            -3.95, 77.85, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.13, -81.03, //
            2.45, 0.0, 22.58, -15.78, -8.16, -1.09, 0.0, 0.0, 0.0, 0.0, //
            -10.61, 0.0, -15.78, 27.10, -2.18, 1.69, 4.32, -4.53, 0.0, 0.0, //
            -1.42, 0.0, -8.16, -2.18, 11.76, 0.0, 0.0, 0.0, 0.0, 0.0, //
            -4.85, 0.0, -1.09, 1.69, 0.0, 4.25, 0.0, 0.0, 0.0, 0.0, //
            -4.51, 0.0, 0.0, 4.32, 0.0, 0.0, 3.97, -3.77, 0.0, 0.0, //
            -1.25, 0.0, 0.0, -4.53, 0.0, 0.0, -3.77, 9.55, 0.0, 0.0, //
            0.0, 7.13, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 40.63, -47.76, //
            0.0, -81.03, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -47.76, 128.79,
        ],
    )
}

/// The conditional-independence graph read off a precision matrix's zero
/// pattern.
pub fn graph_of_precision(theta: &PrecisionMatrix, tol: f64) -> UndirectedGraph {
    let d = theta.dim();
    let mut edges = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if theta.entry(i, j).abs() > tol {
                edges.push((i, j));
            }
        }
    }
    UndirectedGraph::new(d, &edges).unwrap()
}

/// Random variogram via the squared distances of Gaussian points in
/// ℝ^{d−1}, rescaled so the largest entry is `scale`. Points in general
/// position give a strictly conditionally negative definite matrix; draws
/// with nearly coincident or nearly affinely dependent points are rejected
/// so that the absolute tolerances of the acceptance criteria are
/// meaningful in f64.
pub fn random_variogram(d: usize, scale: f64, rng: &mut impl Rng) -> VariogramMatrix {
    loop {
        let points: Vec<DVector<f64>> = (0..d)
            .map(|_| DVector::from_fn(d - 1, |_, _| StandardNormal.sample(rng)))
            .collect();
        let mut m = DMatrix::zeros(d, d);
        let mut max = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let diff = &points[i] - &points[j];
                m[(i, j)] = diff.norm_squared();
                max = max.max(m[(i, j)]);
            }
        }
        m *= scale / max;
        let min_off = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .fold(f64::INFINITY, f64::min);
        if min_off < 0.02 * scale {
            continue;
        }
        let Ok(g) = check_variogram(&SymMatrix::new(m).unwrap(), DEFAULT_CND_TOL) else {
            continue;
        };
        // bounded spectral condition on the complement of the kernel
        let (values, _) = hrx_core::sigma_of(&g).eigen();
        if values[1] < 1e-2 * values[d - 1] {
            continue;
        }
        return g;
    }
}

/// Random variogram from a well-rounded point configuration: the covariance
/// transform of a diagonally regularized Wishart matrix. The circumscribed
/// sphere of such configurations stays small, which keeps the singular
/// shift of the t𝟏𝟏ᵀ − ½Γ representation near the origin.
pub fn well_rounded_variogram(d: usize, rng: &mut impl Rng) -> VariogramMatrix {
    loop {
        let cols = 2 * d;
        let a = DMatrix::<f64>::from_fn(d, cols, |_, _| StandardNormal.sample(rng));
        let s = &a * a.transpose() / cols as f64 + DMatrix::identity(d, d) * 0.5;
        let mut gamma = hrx_core::gamma_of(&SymMatrix::symmetrize(s)).into_matrix();
        let mut max = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                max = max.max(gamma[(i, j)]);
            }
        }
        gamma *= 9.0 / max;
        let mut min = f64::INFINITY;
        for i in 0..d {
            for j in (i + 1)..d {
                min = min.min(gamma[(i, j)]);
            }
        }
        if min < 0.1 {
            continue;
        }
        if let Ok(g) = check_variogram(&SymMatrix::new(gamma).unwrap(), DEFAULT_CND_TOL) {
            return g;
        }
    }
}

/// Random connected graph: a uniform random spanning tree plus a number of
/// extra edges.
pub fn random_connected_graph(d: usize, extra_edges: usize, rng: &mut impl Rng) -> UndirectedGraph {
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for w in 1..d {
        let parent = order[rng.random_range(0..w)];
        let child = order[w];
        edges.push((parent.min(child), parent.max(child)));
    }
    let mut candidates: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .filter(|e| !edges.contains(e))
        .collect();
    for _ in 0..extra_edges.min(candidates.len()) {
        let idx = rng.random_range(0..candidates.len());
        edges.push(candidates.swap_remove(idx));
    }
    UndirectedGraph::new(d, &edges).unwrap()
}

/// Adaptive-step Simpson quadrature of the overlap integral for the
/// bivariate normalizing mass: Λᶜ(𝟎) = 2 − ∫₀^∞ e^{−t} Φ((t − Γ/2)/√Γ) dt.
pub fn bivariate_mass_oracle(gamma12: f64) -> f64 {
    let f = |t: f64| (-t).exp() * hrx_core::std_normal_cdf((t - gamma12 / 2.0) / gamma12.sqrt());
    let upper = 60.0f64;
    let n = 200_000usize; // even
    let h = upper / n as f64;
    let mut sum = f(0.0) + f(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    2.0 - sum * h / 3.0
}
