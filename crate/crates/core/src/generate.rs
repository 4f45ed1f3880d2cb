//! Synthetic instances: chains, grids, stochastic block models and small
//! random connected graphs.
//!
//! Every generator is deterministic given its parameters and seed.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::EmpiricalGraph;
use crate::signal::{piecewise_constant, GraphSignal, Observations, Partition};

/// A generated problem with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: EmpiricalGraph,
    pub partition: Partition,
    pub coeffs: Vec<f64>,
    /// Piecewise-constant ground truth.
    pub signal: GraphSignal,
    pub observations: Observations,
    pub warnings: Vec<String>,
}

fn finish(
    graph: EmpiricalGraph,
    partition: Partition,
    coeffs: Vec<f64>,
    samples: &[usize],
    mut warnings: Vec<String>,
) -> Result<Instance> {
    let n = graph.node_count();
    let signal = piecewise_constant(&partition, &coeffs, n)?;
    for &i in samples {
        graph.check_node(i)?;
    }
    let observations = Observations::new(samples.iter().map(|&i| (i, signal.at(i))))?;
    if let Some(i) = graph.isolated_node() {
        warnings.push(format!(
            "node {i} is isolated; the solver will reject this graph"
        ));
    }
    if component_count(&graph) > 1 {
        warnings.push("graph is disconnected".to_string());
    }
    Ok(Instance {
        graph,
        partition,
        coeffs,
        signal,
        observations,
        warnings,
    })
}

fn component_count(g: &EmpiricalGraph) -> usize {
    let mut uf = crate::graph::UnionFind::new(g.node_count());
    let mut count = g.node_count();
    for e in g.edges() {
        if uf.union(e.head - 1, e.tail - 1) {
            count -= 1;
        }
    }
    count
}

/// Path `1 - 2 - ... - n` split into `{1..split}` and `{split+1..n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub n: usize,
    pub split: usize,
    pub intra_weight: f64,
    pub boundary_weight: f64,
    pub samples: Vec<usize>,
    pub coeffs: [f64; 2],
}

impl Default for ChainParams {
    /// Ten nodes, clusters `{1..5}` and `{6..10}`, boundary weight 1/4,
    /// samples at nodes 2 and 7, levels 1 and 0.
    fn default() -> Self {
        Self {
            n: 10,
            split: 5,
            intra_weight: 1.0,
            boundary_weight: 0.25,
            samples: vec![2, 7],
            coeffs: [1.0, 0.0],
        }
    }
}

pub fn chain(p: &ChainParams) -> Result<Instance> {
    if p.n < 2 {
        return Err(Error::InvalidParams("chain needs n >= 2".into()));
    }
    if p.split == 0 || p.split >= p.n {
        return Err(Error::InvalidParams(format!(
            "split must be in 1..{}, got {}",
            p.n, p.split
        )));
    }
    let edges = (1..p.n).map(|i| {
        let w = if i == p.split {
            p.boundary_weight
        } else {
            p.intra_weight
        };
        (i, i + 1, w)
    });
    let graph = EmpiricalGraph::new(p.n, edges)?;
    let partition = Partition::new(
        p.n,
        vec![(1..=p.split).collect(), (p.split + 1..=p.n).collect()],
    )?;
    finish(graph, partition, p.coeffs.to_vec(), &p.samples, Vec::new())
}

/// `rows x cols` 4-neighbour grid; the left `split_col` columns form cluster 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    pub rows: usize,
    pub cols: usize,
    pub split_col: usize,
    pub intra_weight: f64,
    pub boundary_weight: f64,
    pub samples_per_cluster: usize,
    pub coeffs: [f64; 2],
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 6,
            split_col: 3,
            intra_weight: 1.0,
            boundary_weight: 0.25,
            samples_per_cluster: 2,
            coeffs: [1.0, 0.0],
        }
    }
}

pub fn grid(p: &GridParams, seed: u64) -> Result<Instance> {
    if p.rows == 0 || p.cols < 2 || p.split_col == 0 || p.split_col >= p.cols {
        return Err(Error::InvalidParams(
            "grid needs rows >= 1, cols >= 2 and 1 <= split_col < cols".into(),
        ));
    }
    let id = |r: usize, c: usize| r * p.cols + c + 1;
    let left = |c: usize| c < p.split_col;
    let mut edges = Vec::new();
    for r in 0..p.rows {
        for c in 0..p.cols {
            if c + 1 < p.cols {
                let w = if left(c) != left(c + 1) {
                    p.boundary_weight
                } else {
                    p.intra_weight
                };
                edges.push((id(r, c), id(r, c + 1), w));
            }
            if r + 1 < p.rows {
                edges.push((id(r, c), id(r + 1, c), p.intra_weight));
            }
        }
    }
    let n = p.rows * p.cols;
    let graph = EmpiricalGraph::new(n, edges)?;
    let mut clusters = vec![Vec::new(), Vec::new()];
    for r in 0..p.rows {
        for c in 0..p.cols {
            clusters[usize::from(!left(c))].push(id(r, c));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_per_cluster(&clusters, p.samples_per_cluster, &mut rng)?;
    let partition = Partition::new(n, clusters)?;
    finish(graph, partition, p.coeffs.to_vec(), &samples, Vec::new())
}

/// Stochastic block model with blocks of consecutive node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub w_in: f64,
    pub w_out: f64,
    pub samples_per_block: usize,
    /// Level per block; defaults to `0, 1, 2, ...`.
    pub coeffs: Option<Vec<f64>>,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            sizes: vec![5, 5],
            p_in: 0.8,
            p_out: 0.1,
            w_in: 1.0,
            w_out: 0.25,
            samples_per_block: 1,
            coeffs: None,
        }
    }
}

pub fn sbm(p: &SbmParams, seed: u64) -> Result<Instance> {
    if p.sizes.is_empty() || p.sizes.contains(&0) {
        return Err(Error::InvalidParams("block sizes must be positive".into()));
    }
    for (name, prob) in [("p_in", p.p_in), ("p_out", p.p_out)] {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidParams(format!("{name} must be in [0, 1]")));
        }
    }
    let coeffs = match &p.coeffs {
        Some(c) if c.len() != p.sizes.len() => {
            return Err(Error::InvalidParams(format!(
                "{} coefficients for {} blocks",
                c.len(),
                p.sizes.len()
            )))
        }
        Some(c) => c.clone(),
        None => (0..p.sizes.len()).map(|k| k as f64).collect(),
    };
    let n: usize = p.sizes.iter().sum();
    let mut block = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(p.sizes.len());
    let mut next = 1;
    for (k, &s) in p.sizes.iter().enumerate() {
        clusters.push((next..next + s).collect::<Vec<_>>());
        block.extend(std::iter::repeat_n(k, s));
        next += s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            let same = block[i - 1] == block[j - 1];
            let (prob, w) = if same {
                (p.p_in, p.w_in)
            } else {
                (p.p_out, p.w_out)
            };
            if rng.random_bool(prob) {
                edges.push((i, j, w));
            }
        }
    }
    let graph = EmpiricalGraph::new(n, edges)?;
    let samples = sample_per_cluster(&clusters, p.samples_per_block, &mut rng)?;
    let partition = Partition::new(n, clusters)?;
    finish(graph, partition, coeffs, &samples, Vec::new())
}

fn sample_per_cluster(
    clusters: &[Vec<usize>],
    per_cluster: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut samples = Vec::new();
    for c in clusters {
        if per_cluster > c.len() {
            return Err(Error::InvalidParams(format!(
                "cannot sample {per_cluster} nodes from a cluster of {}",
                c.len()
            )));
        }
        let mut picked: Vec<usize> = sample(rng, c.len(), per_cluster)
            .into_iter()
            .map(|k| c[k])
            .collect();
        picked.sort_unstable();
        samples.extend(picked);
    }
    if samples.is_empty() {
        return Err(Error::InvalidParams("no node would be sampled".into()));
    }
    Ok(samples)
}

/// A small random connected graph with random labels.
#[derive(Debug, Clone)]
pub struct RandomProblem {
    pub graph: EmpiricalGraph,
    pub observations: Observations,
}

/// Random spanning tree plus extra edges with probability `extra_p`, weights
/// uniform in `[0.1, 2]`, between 1 and `n` sampled nodes with labels uniform
/// in `[-1, 1]`.
pub fn random_connected(n: usize, extra_p: f64, seed: u64) -> Result<RandomProblem> {
    if n < 2 {
        return Err(Error::InvalidParams("need at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut present = std::collections::BTreeSet::new();
    for v in 2..=n {
        let u = rng.random_range(1..v);
        present.insert((u, v));
        edges.push((u, v, rng.random_range(0.1..=2.0)));
    }
    for i in 1..=n {
        for j in i + 1..=n {
            if !present.contains(&(i, j)) && rng.random_bool(extra_p) {
                edges.push((i, j, rng.random_range(0.1..=2.0)));
            }
        }
    }
    let graph = EmpiricalGraph::new(n, edges)?;
    let m = rng.random_range(1..=n);
    let nodes = sample(&mut rng, n, m);
    let observations = Observations::new(
        nodes
            .into_iter()
            .map(|k| (k + 1, rng.random_range(-1.0..=1.0)))
            .collect::<Vec<_>>(),
    )?;
    Ok(RandomProblem {
        graph,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain() {
        let inst = chain(&ChainParams::default()).unwrap();
        assert_eq!(inst.graph.edge_count(), 9);
        assert_eq!(inst.graph.edges()[4].weight, 0.25);
        assert_eq!(inst.observations.nodes(), &[2, 7]);
        assert_eq!(inst.observations.labels(), &[1.0, 0.0]);
        assert!(inst.warnings.is_empty());
    }

    #[test]
    fn two_node_chain() {
        let inst = chain(&ChainParams {
            n: 2,
            split: 1,
            samples: vec![1],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(inst.graph.edge_count(), 1);
        assert!(chain(&ChainParams {
            n: 1,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn grid_shape() {
        let inst = grid(&GridParams::default(), 7).unwrap();
        // 4 * 5 horizontal + 3 * 6 vertical
        assert_eq!(inst.graph.edge_count(), 38);
        assert_eq!(inst.observations.len(), 4);
        assert_eq!(
            grid(&GridParams::default(), 7).unwrap().observations,
            inst.observations
        );
    }

    #[test]
    fn sbm_is_deterministic_and_warns_when_disconnected() {
        let p = SbmParams {
            p_in: 1.0,
            p_out: 0.0,
            ..Default::default()
        };
        let a = sbm(&p, 3).unwrap();
        let b = sbm(&p, 3).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.graph.edge_count(), 20);
        assert!(a.warnings.iter().any(|w| w.contains("disconnected")));
        assert!(sbm(
            &SbmParams {
                p_in: 1.5,
                ..Default::default()
            },
            0
        )
        .is_err());
    }

    #[test]
    fn random_graphs_are_connected() {
        for seed in 0..20 {
            let p = random_connected(8, 0.2, seed).unwrap();
            assert_eq!(component_count(&p.graph), 1);
            assert!(p.graph.isolated_node().is_none());
            assert!(!p.observations.is_empty());
        }
    }
}
