//! Graph signals, observed labels, partitions and the primal objective.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{Edge, EmpiricalGraph};

/// A real value per node; index `i - 1` holds node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphSignal(Vec<f64>);

impl GraphSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((k, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: k + 1,
                value: v,
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value at 1-based node `i`.
    pub fn at(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for GraphSignal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Labels known on the sampling set, kept sparse and sorted by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    nodes: Vec<usize>,
    labels: Vec<f64>,
}

impl Observations {
    pub fn new<I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut pairs: Vec<(usize, f64)> = samples.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptySamplingSet);
        }
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateLabel(w[0].0));
            }
        }
        for &(i, x) in &pairs {
            if i == 0 {
                return Err(Error::NodeOutOfRange {
                    id: 0,
                    node_count: usize::MAX,
                });
            }
            if !x.is_finite() {
                return Err(Error::NonFinite { node: i, value: x });
            }
        }
        let (nodes, labels) = pairs.into_iter().unzip();
        Ok(Self { nodes, labels })
    }

    /// The sampling set in increasing order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.labels.iter().copied())
    }

    pub fn label(&self, i: usize) -> Option<f64> {
        self.nodes.binary_search(&i).ok().map(|k| self.labels[k])
    }

    /// Largest node id referenced.
    pub fn max_node(&self) -> usize {
        *self.nodes.last().expect("non-empty by construction")
    }

    pub fn check_against(&self, n: usize) -> Result<()> {
        match self.nodes.last() {
            Some(&i) if i > n => Err(Error::NodeOutOfRange {
                id: i,
                node_count: n,
            }),
            _ => Ok(()),
        }
    }
}

/// Disjoint clusters covering all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl Partition {
    pub fn new(node_count: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        const UNSET: usize = usize::MAX;
        let mut membership = vec![UNSET; node_count];
        let mut clusters = clusters;
        for (k, cluster) in clusters.iter_mut().enumerate() {
            if cluster.is_empty() {
                return Err(Error::InvalidPartition(format!(
                    "cluster {} is empty",
                    k + 1
                )));
            }
            cluster.sort_unstable();
            for &i in cluster.iter() {
                if i == 0 || i > node_count {
                    return Err(Error::NodeOutOfRange { id: i, node_count });
                }
                if membership[i - 1] != UNSET {
                    return Err(Error::InvalidPartition(format!(
                        "node {i} belongs to more than one cluster"
                    )));
                }
                membership[i - 1] = k;
            }
        }
        if let Some(i) = membership.iter().position(|&m| m == UNSET) {
            return Err(Error::InvalidPartition(format!(
                "node {} is not covered",
                i + 1
            )));
        }
        Ok(Self {
            clusters,
            membership,
        })
    }

    /// Builds clusters from a per-node assignment; clusters are ordered by label.
    pub fn from_assignment(assignment: &[i64]) -> Result<Self> {
        let mut keys: Vec<i64> = assignment.to_vec();
        keys.sort_unstable();
        keys.dedup();
        let mut clusters = vec![Vec::new(); keys.len()];
        for (k, a) in assignment.iter().enumerate() {
            let c = keys.binary_search(a).expect("key present");
            clusters[c].push(k + 1);
        }
        Self::new(assignment.len(), clusters)
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn node_count(&self) -> usize {
        self.membership.len()
    }

    /// 0-based cluster index of node `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.membership[i - 1]
    }
}

/// Weighted total variation `sum_e W_e |x_head - x_tail|`.
pub fn tv(g: &EmpiricalGraph, x: &GraphSignal) -> Result<f64> {
    check_len("signal", g.node_count(), x.len())?;
    Ok(g.edges()
        .iter()
        .map(|e| e.weight * (x.at(e.tail) - x.at(e.head)).abs())
        .sum())
}

pub fn piecewise_constant(p: &Partition, coeffs: &[f64], n: usize) -> Result<GraphSignal> {
    check_len("cluster coefficients", p.cluster_count(), coeffs.len())?;
    check_len("partition nodes", n, p.node_count())?;
    GraphSignal::new((1..=n).map(|i| coeffs[p.cluster_of(i)]).collect())
}

/// Indices of the edges whose endpoints lie in different clusters.
pub fn boundary_edges(g: &EmpiricalGraph, p: &Partition) -> Result<Vec<usize>> {
    check_len("partition nodes", g.node_count(), p.node_count())?;
    Ok(g.edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| is_boundary(p, e))
        .map(|(k, _)| k)
        .collect())
}

pub(crate) fn is_boundary(p: &Partition, e: &Edge) -> bool {
    p.cluster_of(e.head) != p.cluster_of(e.tail)
}

/// Half the squared error on the sampling set.
pub fn empirical_error(obs: &Observations, x: &GraphSignal) -> Result<f64> {
    obs.check_against(x.len())?;
    Ok(0.5
        * obs
            .iter()
            .map(|(i, label)| (x.at(i) - label).powi(2))
            .sum::<f64>())
}

/// nLasso objective: empirical error plus `lambda` times the total variation.
pub fn primal_objective(
    g: &EmpiricalGraph,
    obs: &Observations,
    x: &GraphSignal,
    lambda: f64,
) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    Ok(empirical_error(obs, x)? + lambda * tv(g, x)?)
}
