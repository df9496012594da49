//! Undirected simple graphs in CSR form and the symmetric GCN normalization
//! `D̂^{-1/2} (A + I) D̂^{-1/2}`.

use crate::dense::Matrix;
use crate::error::{Result, SdssError};

/// Immutable undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Each undirected edge once, as `(u, v)` with `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    row_ptr: Vec<usize>,
    /// Sorted neighbor lists.
    col_idx: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Both orientations of an
    /// edge collapse to one; self-loops are dropped.
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(SdssError::EmptyGraph);
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(u, v) in edge_list {
            for index in [u, v] {
                if index >= n {
                    return Err(SdssError::NodeOutOfRange { index, n });
                }
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + degree[i];
        }
        let mut fill = row_ptr.clone();
        let mut col_idx = vec![0usize; row_ptr[n]];
        for &(u, v) in &edges {
            col_idx[fill[u]] = v;
            fill[u] += 1;
            col_idx[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            col_idx[row_ptr[i]..row_ptr[i + 1]].sort_unstable();
        }
        Ok(Graph {
            n,
            edges,
            row_ptr,
            col_idx,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Unaugmented degrees `d_i = Σ_j A_ij` as reals.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.degree(v) as f64).collect()
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        Graph::new(self.n, &edges)
    }

    /// Number of edges whose endpoints carry different labels.
    pub fn edge_cut(&self, labels: &[usize]) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| labels[u] != labels[v])
            .count()
    }
}

/// `L = D̂^{-1/2} (A + I) D̂^{-1/2}` in CSR form with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Symmetric normalization with self-loops added.
pub fn normalize(g: &Graph) -> NormalizedAdjacency {
    let n = g.n;
    let dhat: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.col_idx.len() + n);
    let mut values = Vec::with_capacity(g.col_idx.len() + n);
    row_ptr.push(0);
    for i in 0..n {
        let nbrs = g.neighbors(i);
        let split = nbrs.partition_point(|&j| j < i);
        let mut push = |j: usize| {
            col_idx.push(j);
            values.push(1.0 / (dhat[i] * dhat[j]).sqrt());
        };
        nbrs[..split].iter().for_each(|&j| push(j));
        push(i);
        nbrs[split..].iter().for_each(|&j| push(j));
        row_ptr.push(col_idx.len());
    }
    NormalizedAdjacency {
        n,
        row_ptr,
        col_idx,
        values,
    }
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` of row `i` in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Entry lookup; zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Sparse-dense product `L · H`, accumulating each output row in column order.
    pub fn spmm(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.n {
            return Err(SdssError::ShapeMismatch {
                op: "spmm",
                left: (self.n, self.n),
                right: h.shape(),
            });
        }
        let cols = h.cols();
        let mut out = Matrix::zeros(self.n, cols);
        for i in 0..self.n {
            let out_row = out.row_mut(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.values[k];
                for (o, &x) in out_row.iter_mut().zip(h.row(self.col_idx[k])) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }
}
