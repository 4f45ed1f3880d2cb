//! The empirical graph and its incidence operator.
//!
//! Nodes are identified by `1..=n` everywhere in the public API. Vectors that
//! live on nodes are stored 0-based, so node `i` is at index `i - 1`. Every
//! undirected edge `{i, j}` is oriented from `head = min(i, j)` to
//! `tail = max(i, j)`, and edges are kept in lexicographic `(head, tail)` order,
//! which fixes the layout of every edge-indexed vector.

use std::collections::BTreeSet;

use crate::error::{check_len, Error, Result};

/// One canonically oriented edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub head: usize,
    pub tail: usize,
    pub weight: f64,
}

/// Weighted undirected graph with the `head < tail` orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGraph {
    node_count: usize,
    edges: Vec<Edge>,
    /// Edge indices incident to each node (0-based node index).
    incident: Vec<Vec<usize>>,
}

impl EmpiricalGraph {
    /// Builds a graph from `(i, j, w)` triples with 1-based ids.
    ///
    /// Pairs are stored as `(min, max, w)` and sorted, so the resulting edge
    /// order does not depend on the input order.
    pub fn new<I>(node_count: usize, edge_list: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut edges = Vec::new();
        for (i, j, w) in edge_list {
            for id in [i, j] {
                if id == 0 || id > node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            let (head, tail) = (i.min(j), i.max(j));
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidWeight {
                    head,
                    tail,
                    weight: w,
                });
            }
            edges.push(Edge {
                head,
                tail,
                weight: w,
            });
        }
        edges.sort_by_key(|e| (e.head, e.tail));
        if let Some(pair) = edges
            .windows(2)
            .find(|p| (p[0].head, p[0].tail) == (p[1].head, p[1].tail))
        {
            return Err(Error::DuplicateEdge {
                head: pair[0].head,
                tail: pair[0].tail,
            });
        }
        let mut incident = vec![Vec::new(); node_count];
        for (idx, e) in edges.iter().enumerate() {
            incident[e.head - 1].push(idx);
            incident[e.tail - 1].push(idx);
        }
        Ok(Self {
            node_count,
            edges,
            incident,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Position of edge `{i, j}` in the canonical order.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.head, e.tail).cmp(&key))
            .ok()
    }

    /// Indices of the edges touching node `i`.
    pub fn incident_edges(&self, i: usize) -> Result<&[usize]> {
        self.check_node(i)?;
        Ok(&self.incident[i - 1])
    }

    /// Number of neighbours of node `i`.
    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_node(i)?;
        Ok(self.incident[i - 1].len())
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incident.iter().map(Vec::len).collect()
    }

    /// First isolated node, if any.
    pub fn isolated_node(&self) -> Option<usize> {
        self.incident.iter().position(Vec::is_empty).map(|i| i + 1)
    }

    pub fn check_node(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.node_count {
            Err(Error::NodeOutOfRange {
                id: i,
                node_count: self.node_count,
            })
        } else {
            Ok(())
        }
    }

    /// Edge differences `x_head - x_tail`, i.e. the incidence matrix applied to `x`.
    pub fn incidence_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("node vector", self.node_count, x.len())?;
        let mut out = vec![0.0; self.edges.len()];
        self.incidence_apply_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn incidence_apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.edges) {
            *o = x[e.head - 1] - x[e.tail - 1];
        }
    }

    /// Net outflow at every node: the transpose of the incidence matrix applied to `y`.
    pub fn divergence(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("edge vector", self.edges.len(), y.len())?;
        let mut out = vec![0.0; self.node_count];
        self.divergence_into(y, &mut out);
        Ok(out)
    }

    /// Accumulates sequentially in edge order, so results are bit-reproducible.
    pub(crate) fn divergence_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (e, &ye) in self.edges.iter().zip(y) {
            out[e.head - 1] += ye;
            out[e.tail - 1] -= ye;
        }
    }

    /// Adds the accumulator node with one star edge per sampled node.
    pub fn extend(&self, sampling_set: &[usize]) -> Result<ExtendedGraph<'_>> {
        ExtendedGraph::new(self, sampling_set)
    }

    /// Spectral norm of `diag(1/d_i)^{1/2} B^T (I/2)^{1/2}` by power iteration.
    ///
    /// Works on the node-side Gram matrix `(1/2) D^{-1/2} B^T B D^{-1/2}`, whose
    /// largest eigenvalue is the squared norm. Iterates until the eigen-residual
    /// is below `1e-8` relative to the current estimate.
    pub fn scaled_operator_norm(&self) -> Result<f64> {
        if let Some(i) = self.isolated_node() {
            return Err(Error::IsolatedNode(i));
        }
        const TOL: f64 = 1e-8;
        const MAX_ITERS: usize = 1_000_000;

        let n = self.node_count;
        let scale: Vec<f64> = self
            .incident
            .iter()
            .map(|inc| (1.0 / inc.len() as f64).sqrt())
            .collect();
        // fixed pseudo-random start; a constant vector can be orthogonal to the
        // leading eigenvector (it is on chains)
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        normalize(&mut v);

        let mut tmp_node = vec![0.0; n];
        let mut tmp_edge = vec![0.0; self.edges.len()];
        let mut mv = vec![0.0; n];
        let mut mu = 0.0;
        for _ in 0..MAX_ITERS {
            for i in 0..n {
                tmp_node[i] = scale[i] * v[i];
            }
            self.incidence_apply_into(&tmp_node, &mut tmp_edge);
            self.divergence_into(&tmp_edge, &mut mv);
            for i in 0..n {
                mv[i] *= 0.5 * scale[i];
            }
            mu = dot(&v, &mv);
            let residual = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - mu * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if mu <= 0.0 {
                // no edges at all is ruled out above; a zero image means v sits in the kernel
                return Ok(0.0);
            }
            if residual <= TOL * mu {
                break;
            }
            v.copy_from_slice(&mv);
            normalize(&mut v);
        }
        Ok(mu.max(0.0).sqrt())
    }
}

/// The empirical graph augmented with the accumulator node and star edges.
#[derive(Debug, Clone)]
pub struct ExtendedGraph<'g> {
    base: &'g EmpiricalGraph,
    star_nodes: Vec<usize>,
    star_slot: Vec<Option<usize>>,
}

impl<'g> ExtendedGraph<'g> {
    pub fn new(base: &'g EmpiricalGraph, sampling_set: &[usize]) -> Result<Self> {
        for &i in sampling_set {
            base.check_node(i)?;
        }
        let star_nodes: Vec<usize> = sampling_set
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if star_nodes.is_empty() {
            return Err(Error::EmptySamplingSet);
        }
        let mut star_slot = vec![None; base.node_count()];
        for (k, &i) in star_nodes.iter().enumerate() {
            star_slot[i - 1] = Some(k);
        }
        Ok(Self {
            base,
            star_nodes,
            star_slot,
        })
    }

    pub fn base(&self) -> &'g EmpiricalGraph {
        self.base
    }

    /// Sampled nodes in increasing order; star edge `k` attaches to `star_nodes()[k]`.
    pub fn star_nodes(&self) -> &[usize] {
        &self.star_nodes
    }

    pub fn star_count(&self) -> usize {
        self.star_nodes.len()
    }

    /// Star edge slot of node `i`, if it is sampled.
    pub fn star_slot(&self, i: usize) -> Option<usize> {
        self.star_slot.get(i.wrapping_sub(1)).copied().flatten()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Disjoint-set forest over 0-based indices.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
