//! Undirected graphs in compressed sparse row form, node/edge masks and the
//! symmetric GCN normalization.
//!
//! Every undirected edge `{u, v}` is stored twice, once in each endpoint's
//! neighbor list. Neighbor lists are sorted, so a stored edge is addressed by
//! its position in the flat target array and the reverse direction can be
//! found by binary search.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    masked: bool,
}

impl Graph {
    /// Builds a graph from undirected pairs. Pairs may be given in either
    /// orientation but each must appear once.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self loop on node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut targets = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        for (u, mut nbrs) in adjacency.into_iter().enumerate() {
            nbrs.sort_unstable();
            if let Some(w) = nbrs.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {})", w[0])));
            }
            targets.extend_from_slice(&nbrs);
            offsets.push(targets.len());
        }
        Ok(Graph {
            offsets,
            targets,
            masked: false,
        })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Graph {
            offsets: vec![0; num_nodes + 1],
            targets: Vec::new(),
            masked: false,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of stored directed entries (twice the undirected edge count).
    pub fn num_stored_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Range of stored-edge indices owned by `u`.
    pub fn edge_range(&self, u: usize) -> std::ops::Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|u| self.degree(u)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.find_edge(u, v).is_some()
    }

    /// Stored-edge index of `(u, v)`, if present.
    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.num_nodes() {
            return None;
        }
        self.neighbors(u).binary_search(&v).ok().map(|i| self.offsets[u] + i)
    }

    /// Stored-edge index of the reverse direction of stored edge `e`.
    pub fn reverse_edge(&self, e: usize) -> usize {
        let (u, v) = self.stored_edge(e);
        self.find_edge(v, u).expect("graph is symmetric")
    }

    /// Source and target of stored edge `e`.
    pub fn stored_edge(&self, e: usize) -> (usize, usize) {
        let u = self.offsets.partition_point(|&o| o <= e) - 1;
        (u, self.targets[e])
    }

    /// All stored entries `(u, v)` in storage order.
    pub fn stored_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.stored_edges().filter(|&(u, v)| u < v)
    }

    /// True when this graph was produced by applying a node or edge mask.
    pub fn is_masked(&self) -> bool {
        self.masked
    }

    /// `A' = B A B`: drops every edge incident to a node with `b = 0`.
    /// Dropped nodes stay in place as isolated nodes.
    pub fn apply_node_mask(&self, mask: &NodeMask) -> Result<Graph> {
        if mask.len() != self.num_nodes() {
            return Err(Error::shape("node mask", self.num_nodes(), mask.len()));
        }
        let keep = mask.as_slice();
        Ok(self.filter(|u, v, _| keep[u] && keep[v]))
    }

    /// `A' = A ⊙ B^E` for a symmetric mask over stored edges.
    pub fn apply_edge_mask(&self, mask: &EdgeMask) -> Result<Graph> {
        if mask.len() != self.num_stored_edges() {
            return Err(Error::shape("edge mask", self.num_stored_edges(), mask.len()));
        }
        if !mask.is_symmetric(self) {
            return Err(Error::InvalidArgument("edge mask is not symmetric".into()));
        }
        let keep = mask.as_slice();
        Ok(self.filter(|_, _, e| keep[e]))
    }

    /// Removes the edges retained by `mask`, keeping the rest.
    pub fn remove_edges(&self, mask: &EdgeMask) -> Result<Graph> {
        self.apply_edge_mask(&mask.complement())
    }

    fn filter(&self, keep: impl Fn(usize, usize, usize) -> bool) -> Graph {
        let mut offsets = Vec::with_capacity(self.offsets.len());
        let mut targets = Vec::with_capacity(self.targets.len());
        offsets.push(0);
        for u in 0..self.num_nodes() {
            for e in self.edge_range(u) {
                let v = self.targets[e];
                if keep(u, v, e) {
                    targets.push(v);
                }
            }
            offsets.push(targets.len());
        }
        Graph {
            offsets,
            targets,
            masked: true,
        }
    }

    /// Relabels nodes so that old node `u` becomes `perm[u]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes() {
            return Err(Error::shape("permutation", self.num_nodes(), perm.len()));
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        Graph::from_edges(self.num_nodes(), &edges)
    }
}

/// Per-node keep indicator (`true` = keep).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask(Vec<bool>);

impl NodeMask {
    pub fn new(keep: Vec<bool>) -> Self {
        NodeMask(keep)
    }

    pub fn all(n: usize) -> Self {
        NodeMask(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn kept(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Per-stored-edge keep indicator (`true` = keep). Must be symmetric to be applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask(Vec<bool>);

impl EdgeMask {
    pub fn new(keep: Vec<bool>) -> Self {
        EdgeMask(keep)
    }

    pub fn all(g: &Graph) -> Self {
        EdgeMask(vec![true; g.num_stored_edges()])
    }

    pub fn none(g: &Graph) -> Self {
        EdgeMask(vec![false; g.num_stored_edges()])
    }

    /// Builds a symmetric mask from a predicate on undirected pairs `(u, v)` with `u < v`.
    pub fn from_pairs(g: &Graph, keep: impl Fn(usize, usize) -> bool) -> Self {
        EdgeMask(g.stored_edges().map(|(u, v)| keep(u.min(v), u.max(v))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn kept(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> EdgeMask {
        EdgeMask(self.0.iter().map(|&b| !b).collect())
    }

    pub fn is_symmetric(&self, g: &Graph) -> bool {
        self.0.len() == g.num_stored_edges() && (0..self.0.len()).all(|e| self.0[e] == self.0[g.reverse_edge(e)])
    }

    /// Undirected pairs kept by this mask.
    pub fn kept_pairs<'a>(&'a self, g: &'a Graph) -> impl Iterator<Item = (usize, usize)> + 'a {
        g.stored_edges()
            .zip(self.0.iter())
            .filter(|((u, v), &k)| k && u < v)
            .map(|(p, _)| p)
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` in CSR form, self loops included.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    masked: bool,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> Self {
        let n = g.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n).map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(g.num_stored_edges() + n);
        let mut weights = Vec::with_capacity(g.num_stored_edges() + n);
        offsets.push(0);
        for u in 0..n {
            let mut self_done = false;
            for &v in g.neighbors(u) {
                if !self_done && v > u {
                    cols.push(u);
                    weights.push(1.0 / (g.degree(u) + 1) as f64);
                    self_done = true;
                }
                cols.push(v);
                weights.push(inv_sqrt[u] * inv_sqrt[v]);
            }
            if !self_done {
                cols.push(u);
                weights.push(1.0 / (g.degree(u) + 1) as f64);
            }
            offsets.push(cols.len());
        }
        NormalizedAdjacency {
            offsets,
            cols,
            weights,
            masked: g.is_masked(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Whether the source graph carried a dropping/explanation mask.
    pub fn is_masked(&self) -> bool {
        self.masked
    }

    /// `(column, weight)` entries of row `u`, sorted by column.
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        let r = self.offsets[u]..self.offsets[u + 1];
        match self.cols[r.clone()].binary_search(&v) {
            Ok(i) => self.weights[r.start + i],
            Err(_) => 0.0,
        }
    }

    /// Sparse-dense product `Â · m`. `Â` is symmetric so this also serves as `Âᵀ · m`.
    pub fn matmul(&self, m: &ArrayView2<f64>) -> Array2<f64> {
        let (rows, cols) = m.dim();
        assert_eq!(rows, self.num_nodes(), "adjacency/matrix row mismatch");
        let mut out = Array2::<f64>::zeros((rows, cols));
        for (u, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (v, w) in self.row(u) {
                out_row.scaled_add(w, &m.row(v));
            }
        }
        out
    }
}
