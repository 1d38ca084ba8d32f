//! Undirected graphs and the chordal-graph machinery used by the matrix
//! completion algorithms: connectivity, chordality via maximum cardinality
//! search, clique orderings with the running intersection property, block
//! graph detection and decomposable covers.
//!
//! Nodes are `0..d`. External 1-based labels are translated at the I/O
//! boundary.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::matrix::SymMatrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {node} out of range for a graph on {d} nodes")]
    InvalidNode { node: usize, d: usize },
    #[error("self-loop at node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("graph is not connected")]
    NotConnected,
    #[error("graph is not decomposable (a chordless cycle exists)")]
    NotDecomposable,
    #[error("graph is not a block graph (a separator has more than one node)")]
    NotBlockGraph,
    #[error("graph is complete, nothing to cover")]
    CompleteGraph,
    #[error("graph must have at least one node")]
    Empty,
}

/// A simple undirected graph on nodes `0..d`, stored as adjacency sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    d: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(d: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if d == 0 {
            return Err(GraphError::Empty);
        }
        let mut adj = vec![BTreeSet::new(); d];
        for &(i, j) in edges {
            if i >= d {
                return Err(GraphError::InvalidNode { node: i, d });
            }
            if j >= d {
                return Err(GraphError::InvalidNode { node: j, d });
            }
            if i == j {
                return Err(GraphError::SelfLoop { node: i });
            }
            adj[i].insert(j);
            adj[j].insert(i);
        }
        Ok(Self { d, adj })
    }

    pub fn complete(d: usize) -> Self {
        let mut adj = vec![BTreeSet::new(); d];
        for (i, nbrs) in adj.iter_mut().enumerate() {
            nbrs.extend((0..d).filter(|&j| j != i));
        }
        Self { d, adj }
    }

    pub fn num_nodes(&self) -> usize {
        self.d
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.d && self.adj[i].contains(&j)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Edges as ordered pairs (i, j) with i < j, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for i in 0..self.d {
            for &j in &self.adj[i] {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Non-edges as ordered pairs (i, j) with i < j, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                if !self.adj[i].contains(&j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        self.num_edges() == self.d * (self.d - 1) / 2
    }

    /// Graph with the same nodes and the given edge added.
    pub fn with_edge(&self, i: usize, j: usize) -> Self {
        let mut g = self.clone();
        if i != j {
            g.adj[i].insert(j);
            g.adj[j].insert(i);
        }
        g
    }
}

/// True iff every pair of nodes is joined by a path.
pub fn is_connected(g: &UndirectedGraph) -> bool {
    let d = g.num_nodes();
    let mut seen = vec![false; d];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == d
}

/// Maximum cardinality search. Returns the visit order; its reverse is a
/// perfect elimination ordering exactly when the graph is chordal.
fn mcs_order(g: &UndirectedGraph) -> Vec<usize> {
    let d = g.num_nodes();
    let mut weight = vec![0usize; d];
    let mut visited = vec![false; d];
    let mut order = Vec::with_capacity(d);
    for _ in 0..d {
        let v = (0..d)
            .filter(|&v| !visited[v])
            .max_by_key(|&v| (weight[v], usize::MAX - v))
            .expect("unvisited node exists");
        visited[v] = true;
        order.push(v);
        for w in g.neighbors(v) {
            if !visited[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// True iff the graph is chordal: every cycle of four or more nodes has a
/// chord. Tested by verifying that the reverse MCS order is a perfect
/// elimination ordering.
pub fn is_decomposable(g: &UndirectedGraph) -> bool {
    let order = mcs_order(g);
    let d = g.num_nodes();
    let mut position = vec![0usize; d];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }
    for (pos, &v) in order.iter().enumerate() {
        // Neighbors visited before v, with their latest-visited member u.
        let earlier: Vec<usize> = g.neighbors(v).filter(|&w| position[w] < pos).collect();
        let Some(&u) = earlier.iter().max_by_key(|&&w| position[w]) else {
            continue;
        };
        for &w in &earlier {
            if w != u && !g.has_edge(u, w) {
                return false;
            }
        }
    }
    true
}

/// An ordered sequence of the maximal cliques of a decomposable graph,
/// together with the separators D_i = C_i ∩ (C_1 ∪ … ∪ C_{i-1}). The order
/// satisfies the running intersection property: each separator is contained
/// in some earlier clique.
#[derive(Debug, Clone)]
pub struct CliqueOrdering {
    pub cliques: Vec<Vec<usize>>,
    /// Separators D_2 … D_N; `separators[i]` belongs to `cliques[i + 1]`.
    pub separators: Vec<Vec<usize>>,
}

/// Maximal cliques of a chordal graph, read off a perfect elimination
/// ordering.
fn chordal_maximal_cliques(g: &UndirectedGraph, order: &[usize]) -> Vec<BTreeSet<usize>> {
    let d = g.num_nodes();
    let mut position = vec![0usize; d];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }
    let mut candidates: Vec<BTreeSet<usize>> = Vec::with_capacity(d);
    for (pos, &v) in order.iter().enumerate() {
        let mut c: BTreeSet<usize> = g
            .neighbors(v)
            .filter(|&w| position[w] < pos)
            .collect();
        c.insert(v);
        candidates.push(c);
    }
    let mut cliques: Vec<BTreeSet<usize>> = Vec::new();
    'outer: for c in candidates {
        for other in &cliques {
            if c.is_subset(other) {
                continue 'outer;
            }
        }
        cliques.retain(|other| !other.is_subset(&c));
        cliques.push(c);
    }
    cliques
}

/// Clique ordering with the running intersection property for a connected
/// decomposable graph. Built by a maximum-weight spanning tree on the
/// clique intersection graph (a junction tree), traversed in preorder.
pub fn clique_ordering(g: &UndirectedGraph) -> Result<CliqueOrdering, GraphError> {
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    if !is_decomposable(g) {
        return Err(GraphError::NotDecomposable);
    }
    let order = mcs_order(g);
    let cliques = chordal_maximal_cliques(g, &order);
    let n = cliques.len();
    if n == 1 {
        return Ok(CliqueOrdering {
            cliques: vec![cliques[0].iter().copied().collect()],
            separators: Vec::new(),
        });
    }
    // Prim's algorithm on intersection sizes yields a junction tree, and any
    // preorder of it satisfies the running intersection property.
    let mut in_tree = vec![false; n];
    let mut ordered: Vec<usize> = Vec::with_capacity(n);
    in_tree[0] = true;
    ordered.push(0);
    while ordered.len() < n {
        let mut best: Option<(usize, usize)> = None; // (weight, clique index)
        for c in 0..n {
            if in_tree[c] {
                continue;
            }
            let w = ordered
                .iter()
                .map(|&t| cliques[c].intersection(&cliques[t]).count())
                .max()
                .unwrap_or(0);
            match best {
                Some((bw, bc)) if (w, usize::MAX - c) <= (bw, usize::MAX - bc) => {}
                _ => best = Some((w, c)),
            }
        }
        let (w, c) = best.expect("candidate clique exists");
        if w == 0 {
            // Disjoint clique component; cannot happen for connected graphs.
            return Err(GraphError::NotConnected);
        }
        in_tree[c] = true;
        ordered.push(c);
    }

    let cliques_ordered: Vec<Vec<usize>> = ordered
        .iter()
        .map(|&c| cliques[c].iter().copied().collect())
        .collect();
    let mut separators = Vec::with_capacity(n - 1);
    let mut union: BTreeSet<usize> = cliques_ordered[0].iter().copied().collect();
    for clique in cliques_ordered.iter().skip(1) {
        let sep: Vec<usize> = clique.iter().copied().filter(|v| union.contains(v)).collect();
        debug_assert!(
            cliques_ordered
                .iter()
                .take_while(|c| !std::ptr::eq(*c, clique))
                .any(|c| sep.iter().all(|v| c.contains(v))),
            "running intersection property violated"
        );
        separators.push(sep);
        union.extend(clique.iter().copied());
    }
    Ok(CliqueOrdering {
        cliques: cliques_ordered,
        separators,
    })
}

/// True iff the graph is decomposable with every separator a single node.
pub fn is_block_graph(g: &UndirectedGraph) -> bool {
    match clique_ordering(g) {
        Ok(co) => co.separators.iter().all(|s| s.len() <= 1),
        Err(_) => false,
    }
}

/// Strategy for constructing a family of decomposable graphs whose edge
/// sets intersect in the target graph's edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoverStrategy {
    /// One cover member per missing edge: the complete graph minus that
    /// edge. Always valid, converges slowly for sparse graphs.
    #[default]
    OnePerNonedge,
    /// Chordal fill-ins that each exclude at least one missing edge,
    /// typically producing far fewer and sparser members.
    FillIn,
}

/// Decomposable graphs G_1 … G_m on the same nodes with ⋂ E_i = E.
/// Every member is chordal and contains all edges of `g`.
pub fn decomposable_cover(
    g: &UndirectedGraph,
    strategy: CoverStrategy,
) -> Result<Vec<UndirectedGraph>, GraphError> {
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    let non_edges = g.non_edges();
    if non_edges.is_empty() {
        return Err(GraphError::CompleteGraph);
    }
    let d = g.num_nodes();
    let complete_minus = |(i, j): (usize, usize)| {
        let mut cg = UndirectedGraph::complete(d);
        cg.adj[i].remove(&j);
        cg.adj[j].remove(&i);
        cg
    };
    match strategy {
        CoverStrategy::OnePerNonedge => Ok(non_edges.into_iter().map(complete_minus).collect()),
        CoverStrategy::FillIn => {
            let mut members: Vec<UndirectedGraph> = Vec::new();
            let mut uncovered: BTreeSet<(usize, usize)> = non_edges.iter().copied().collect();
            while let Some(&(a, b)) = uncovered.iter().next() {
                // Eliminating an endpoint of (a, b) first guarantees the
                // fill-in never introduces that edge.
                let ha = elimination_fill(g, Some(a));
                let hb = elimination_fill(g, Some(b));
                let h = if hb.num_edges() < ha.num_edges() { hb } else { ha };
                let member = if is_decomposable(&h) && !h.has_edge(a, b) {
                    h
                } else {
                    complete_minus((a, b))
                };
                uncovered.retain(|&(i, j)| member.has_edge(i, j));
                members.push(member);
            }
            // The intersection of member edge sets must reproduce E exactly.
            let ok = g.non_edges().iter().all(|&(i, j)| {
                members.iter().any(|m| !m.has_edge(i, j))
            }) && members.iter().all(|m| {
                g.edges().iter().all(|&(i, j)| m.has_edge(i, j))
            });
            if !ok {
                return decomposable_cover(g, CoverStrategy::OnePerNonedge);
            }
            Ok(members)
        }
    }
}

/// Greedy minimum-fill elimination. The returned graph is the original plus
/// all fill edges, chordal by construction. When `first` is given, that
/// node is eliminated before any other.
fn elimination_fill(g: &UndirectedGraph, first: Option<usize>) -> UndirectedGraph {
    let d = g.num_nodes();
    let mut adj: Vec<BTreeSet<usize>> = g.adj.clone();
    let mut filled = g.clone();
    let mut remaining: BTreeSet<usize> = (0..d).collect();
    let mut force = first;
    while !remaining.is_empty() {
        let fill_count = |v: usize, adj: &[BTreeSet<usize>]| {
            let nbrs: Vec<usize> = adj[v].iter().copied().collect();
            let mut cnt = 0usize;
            for (x, &a) in nbrs.iter().enumerate() {
                for &b in nbrs.iter().skip(x + 1) {
                    if !adj[a].contains(&b) {
                        cnt += 1;
                    }
                }
            }
            cnt
        };
        let v = match force.take() {
            Some(v) => v,
            None => *remaining
                .iter()
                .min_by_key(|&&v| (fill_count(v, &adj), v))
                .expect("remaining is non-empty"),
        };
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for (x, &a) in nbrs.iter().enumerate() {
            for &b in nbrs.iter().skip(x + 1) {
                if !adj[a].contains(&b) {
                    adj[a].insert(b);
                    adj[b].insert(a);
                    filled.adj[a].insert(b);
                    filled.adj[b].insert(a);
                }
            }
        }
        remaining.remove(&v);
        for s in adj.iter_mut() {
            s.remove(&v);
        }
    }
    filled
}

/// The graph Laplacian: degree on the diagonal, −1 on edges, 0 elsewhere.
/// For a connected graph this is the canonical graph-structured precision
/// matrix (zero row sums, kernel span{1}).
pub fn graph_laplacian(g: &UndirectedGraph) -> SymMatrix {
    let d = g.num_nodes();
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            g.degree(i) as f64
        } else if g.has_edge(i, j) {
            -1.0
        } else {
            0.0
        }
    });
    SymMatrix::symmetrize(m)
}

/// All maximal cliques of an arbitrary graph (Bron–Kerbosch with pivoting),
/// returned in lexicographic order. Intended for small graphs.
pub fn maximal_cliques(g: &UndirectedGraph) -> Vec<Vec<usize>> {
    fn extend(
        g: &UndirectedGraph,
        r: &mut BTreeSet<usize>,
        mut p: BTreeSet<usize>,
        mut x: BTreeSet<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() && x.is_empty() {
            out.push(r.iter().copied().collect());
            return;
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| g.adj[u].intersection(&p).count())
            .expect("p or x non-empty");
        let candidates: Vec<usize> = p.difference(&g.adj[pivot]).copied().collect();
        for v in candidates {
            r.insert(v);
            let p2: BTreeSet<usize> = p.intersection(&g.adj[v]).copied().collect();
            let x2: BTreeSet<usize> = x.intersection(&g.adj[v]).copied().collect();
            extend(g, r, p2, x2, out);
            r.remove(&v);
            p.remove(&v);
            x.insert(v);
        }
    }
    let mut out = Vec::new();
    let mut r = BTreeSet::new();
    extend(
        g,
        &mut r,
        (0..g.num_nodes()).collect(),
        BTreeSet::new(),
        &mut out,
    );
    out.sort();
    out
}
