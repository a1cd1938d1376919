//! Undirected simple graphs, Laplacian algebra, spectral connectivity checks,
//! and i.i.d. randomly activated edge processes.
//!
//! Node indices are 0-based in the API and 1-based in JSON, matching the
//! numbering conventions of the configuration files.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::stream;

/// Eigenvalues below this are treated as zero when deciding connectivity.
pub const CONNECTIVITY_TOL: f64 = 1e-8;

/// Simple undirected graph: no self-loops, no duplicate edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    /// Normalized (i < j), sorted, deduplicated.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbor lists, one per node.
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Build a graph from 0-based endpoint pairs.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::EdgeOutOfRange {
                    i: i + 1,
                    j: j + 1,
                    n: node_count,
                });
            }
            if i == j {
                return Err(Error::SelfLoop { i: i + 1 });
            }
            normalized.push((i.min(j), i.max(j)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge {
                i: w[0].0 + 1,
                j: w[0].1 + 1,
            });
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(i, j) in &normalized {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            node_count,
            edges: normalized,
            adjacency,
        })
    }

    /// Build from 1-based endpoint pairs, as used in configuration files.
    pub fn from_one_based(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let shifted: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(i, j)| {
                if i == 0 || j == 0 {
                    Err(Error::EdgeOutOfRange {
                        i,
                        j,
                        n: node_count,
                    })
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(node_count, &shifted)
    }

    pub fn edgeless(node_count: usize) -> Self {
        Self::new(node_count, &[]).expect("edgeless graph is always valid")
    }

    /// Cycle 0-1-...-(n-1)-0. For n = 2 this is a single edge.
    pub fn ring(node_count: usize) -> Result<Self> {
        if node_count < 3 {
            return Err(Error::InvalidParameter(format!(
                "ring needs at least 3 nodes, got {node_count}"
            )));
        }
        let edges: Vec<_> = (0..node_count)
            .map(|i| (i, (i + 1) % node_count))
            .collect();
        Self::new(node_count, &edges)
    }

    /// Path 0-1-...-(n-1).
    pub fn path(node_count: usize) -> Result<Self> {
        let edges: Vec<_> = (0..node_count.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::new(node_count, &edges)
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..node_count {
            for j in (i + 1)..node_count {
                edges.push((i, j));
            }
        }
        Self::new(node_count, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i.min(j), i.max(j));
        self.edges.binary_search(&(a, b)).is_ok()
    }

    /// Breadth-first connectivity check; this is the combinatorial oracle the
    /// spectral test (`algebraic_connectivity > 0`) must agree with.
    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.node_count];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.node_count
    }

    /// Hop distances from `source` (usize::MAX for unreachable nodes).
    pub fn hop_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count];
        dist[source] = 0;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// L = D - A.
    pub fn laplacian(&self) -> Laplacian {
        let n = self.node_count;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for &(i, j) in &self.edges {
            m[(i, j)] = -1.0;
            m[(j, i)] = -1.0;
            m[(i, i)] += 1.0;
            m[(j, j)] += 1.0;
        }
        Laplacian { matrix: m }
    }

    /// Subgraph on `nodes` (0-based), keeping exactly the edges with both
    /// endpoints in the set. Returns the subgraph together with the map from
    /// new index to original node index.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
        if nodes.is_empty() {
            return Err(Error::EmptyNodeSet);
        }
        let mut kept: Vec<usize> = nodes.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&bad) = kept.iter().find(|&&v| v >= self.node_count) {
            return Err(Error::EdgeOutOfRange {
                i: bad + 1,
                j: bad + 1,
                n: self.node_count,
            });
        }
        let mut relabel = vec![usize::MAX; self.node_count];
        for (new, &old) in kept.iter().enumerate() {
            relabel[old] = new;
        }
        let sub_edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(i, j)| relabel[i] != usize::MAX && relabel[j] != usize::MAX)
            .map(|&(i, j)| (relabel[i], relabel[j]))
            .collect();
        Ok((Graph::new(kept.len(), &sub_edges)?, kept))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Serialize for Graph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = GraphWire {
            n: self.node_count,
            edges: self.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = GraphWire::deserialize(d)?;
        Graph::from_one_based(wire.n, &wire.edges).map_err(D::Error::custom)
    }
}

/// Symmetric positive-semidefinite matrix with zero row sums. Produced from a
/// graph (off-diagonals in {0, -1}) or as a scaled mean of an edge-activation
/// process (weighted off-diagonals).
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
}

impl Laplacian {
    /// Wrap a matrix, validating symmetry and zero row sums.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "laplacian",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "laplacian not symmetric at ({i}, {j})"
                    )));
                }
                row_sum += matrix[(i, j)];
            }
            if row_sum.abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "laplacian row {i} sums to {row_sum:e}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    /// Entrywise scaling; keeps symmetry and zero row sums.
    pub fn scaled(&self, factor: f64) -> Laplacian {
        Laplacian {
            matrix: &self.matrix * factor,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        eig
    }

    /// Second-smallest eigenvalue; positive exactly when the graph is
    /// connected. A single-node graph is vacuously connected, so its
    /// algebraic connectivity is reported as infinite.
    pub fn algebraic_connectivity(&self) -> f64 {
        if self.node_count() < 2 {
            return f64::INFINITY;
        }
        self.eigenvalues()[1]
    }

    /// Spectral connectivity verdict with tolerance `CONNECTIVITY_TOL`.
    pub fn indicates_connected(&self) -> bool {
        self.algebraic_connectivity() > CONNECTIVITY_TOL
    }
}

/// i.i.d. sequence of Laplacians: each edge of a base graph is independently
/// active with probability `edge_activation_probability` at every step, so
/// the mean Laplacian is p * L_base. With p = 1 the process is the static
/// base graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianProcess {
    base_graph: Graph,
    edge_activation_probability: f64,
    seed: u64,
}

impl LaplacianProcess {
    pub fn new(base_graph: Graph, edge_activation_probability: f64, seed: u64) -> Result<Self> {
        if !(edge_activation_probability > 0.0 && edge_activation_probability <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "edge activation probability must be in (0, 1], got {edge_activation_probability}"
            )));
        }
        Ok(Self {
            base_graph,
            edge_activation_probability,
            seed,
        })
    }

    /// Static process: the base graph at every step.
    pub fn static_graph(base_graph: Graph) -> Self {
        Self {
            base_graph,
            edge_activation_probability: 1.0,
            seed: 0,
        }
    }

    pub fn base_graph(&self) -> &Graph {
        &self.base_graph
    }

    pub fn edge_activation_probability(&self) -> f64 {
        self.edge_activation_probability
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_static(&self) -> bool {
        self.edge_activation_probability == 1.0
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Topology at step `t`: a pure function of (seed, t).
    pub fn sample_graph(&self, t: u64) -> Graph {
        if self.is_static() {
            return self.base_graph.clone();
        }
        let mut rng = stream::stream_rng(self.seed, t);
        let edges: Vec<(usize, usize)> = self
            .base_graph
            .edges()
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < self.edge_activation_probability)
            .collect();
        Graph::new(self.base_graph.node_count(), &edges)
            .expect("subset of a valid edge set is valid")
    }

    /// Laplacian at step `t`.
    pub fn sample(&self, t: u64) -> Laplacian {
        self.sample_graph(t).laplacian()
    }

    /// Mean Laplacian p * L_base; lambda_2 of this is positive iff the base
    /// graph is connected.
    pub fn mean_laplacian(&self) -> Laplacian {
        self.base_graph
            .laplacian()
            .scaled(self.edge_activation_probability)
    }
}

/// Quadratic form x^T L x, evaluated without forming L explicitly when a
/// graph is at hand.
pub fn laplacian_quadratic_form(l: &Laplacian, x: &DVector<f64>) -> f64 {
    (x.transpose() * l.matrix() * x)[(0, 0)]
}
