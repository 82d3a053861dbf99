//! Inter-agent communication topology.
//!
//! The estimator runs on a simple undirected graph over agents `0..n`. The
//! only spectral quantities the algorithm needs are the two extreme nonzero
//! eigenvalues of the graph Laplacian `L = D - A`: the algebraic
//! connectivity `lambda2` (positive iff the graph is connected) and the
//! largest eigenvalue `lambdaN` (which caps the usable consensus weight via
//! `b <= 1/lambdaN`).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex count must be at least 1")]
    EmptyGraph,
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) references a vertex >= n = {2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric: max asymmetry {asymmetry:e} exceeds tol {tol:e} (scale {scale:e})")]
    NotSymmetric { asymmetry: f64, tol: f64, scale: f64 },
    #[error("eigensolver residual {residual:e} exceeds tol * ||L||_2 = {bound:e}")]
    EigenResidual { residual: f64, bound: f64 },
    #[error("malformed edge list: {0}")]
    Parse(String),
}

/// Simple undirected graph on vertices `0..n`, immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Extreme Laplacian eigenvalues, plus the residual achieved by the solver
/// for the two reported eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub lambda2: f64,
    pub lambda_n: f64,
    /// Max of ||L v - lambda v||_2 over the two reported eigenpairs.
    pub residual: f64,
}

impl Graph {
    /// Builds a graph from an edge set. Edges are deduplicated and stored
    /// with `u < v`; self-loops and out-of-range vertices are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u, v));
            }
            if u >= n || v >= n {
                return Err(GraphError::VertexOutOfRange(u, v, n));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for adj in &mut neighbors {
            adj.sort_unstable();
        }
        Ok(Self { n, edges, neighbors })
    }

    /// Random geometric graph: `n` points i.i.d. uniform in the unit square,
    /// an edge wherever the Euclidean distance is at most `radius`.
    /// Deterministic for a fixed `(n, radius, seed)` triple. The output may
    /// be disconnected; callers that need connectivity should retry with a
    /// fresh seed (see the harness).
    pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let r2 = radius * radius;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let dx = points[u].0 - points[v].0;
                let dy = points[u].1 - points[v].1;
                if dx * dx + dy * dy <= r2 {
                    edges.push((u, v));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// True iff a traversal from vertex 0 reaches every vertex.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }

    /// Graph Laplacian `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(u, v) in &self.edges {
            l[(u, v)] = -1.0;
            l[(v, u)] = -1.0;
            l[(u, u)] += 1.0;
            l[(v, v)] += 1.0;
        }
        l
    }

    /// Serializes as the edge-list text format: a `n <count>` header line,
    /// then one ascending `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n {}", self.n).unwrap();
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    /// Parses the edge-list text format produced by [`Graph::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GraphError::Parse("empty input".into()))?;
        let mut parts = header.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("n"), Some(count), None) => {
                let n: usize = count
                    .parse()
                    .map_err(|e| GraphError::Parse(format!("bad vertex count {count:?}: {e}")))?;
                let mut edges = Vec::new();
                for line in lines {
                    let mut it = line.split_whitespace();
                    match (it.next(), it.next(), it.next()) {
                        (Some(u), Some(v), None) => {
                            let u: usize = u
                                .parse()
                                .map_err(|e| GraphError::Parse(format!("bad vertex {u:?}: {e}")))?;
                            let v: usize = v
                                .parse()
                                .map_err(|e| GraphError::Parse(format!("bad vertex {v:?}: {e}")))?;
                            edges.push((u, v));
                        }
                        _ => return Err(GraphError::Parse(format!("expected `u v`, got {line:?}"))),
                    }
                }
                Self::new(n, edges)
            }
            _ => Err(GraphError::Parse(format!("expected header `n <count>`, got {header:?}"))),
        }
    }
}

/// Extreme eigenvalues of a symmetric PSD matrix (a Laplacian in practice).
///
/// `lambda2` is the second-smallest and `lambda_n` the largest eigenvalue.
/// Rejects matrices whose asymmetry exceeds `tol` relative to the largest
/// entry, and reports the eigen-residual actually achieved. For a 1x1
/// matrix both eigenvalues are reported as the single entry.
pub fn spectral_bounds(l: &DMatrix<f64>, tol: f64) -> Result<SpectralSummary, GraphError> {
    let (rows, cols) = l.shape();
    if rows != cols || rows == 0 {
        return Err(GraphError::NotSquare(rows, cols));
    }
    let scale = l.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut asymmetry = 0.0f64;
    for i in 0..rows {
        for j in (i + 1)..rows {
            asymmetry = asymmetry.max((l[(i, j)] - l[(j, i)]).abs());
        }
    }
    if asymmetry > tol * scale.max(1.0) {
        return Err(GraphError::NotSymmetric { asymmetry, tol, scale });
    }

    if rows == 1 {
        return Ok(SpectralSummary { lambda2: l[(0, 0)], lambda_n: l[(0, 0)], residual: 0.0 });
    }

    let eigen = l.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let second = order[1];
    let largest = order[rows - 1];
    let lambda2 = eigen.eigenvalues[second];
    let lambda_n = eigen.eigenvalues[largest];

    let residual_of = |idx: usize| -> f64 {
        let v: DVector<f64> = eigen.eigenvectors.column(idx).into();
        (l * &v - eigen.eigenvalues[idx] * &v).norm()
    };
    let residual = residual_of(second).max(residual_of(largest));
    let norm2 = eigen.eigenvalues[order[0]].abs().max(lambda_n.abs());
    if residual > tol * norm2 && norm2 > 0.0 {
        return Err(GraphError::EigenResidual { residual, bound: tol * norm2 });
    }
    Ok(SpectralSummary { lambda2, lambda_n, residual })
}

/// Default relative tolerance for spectral computations.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;
