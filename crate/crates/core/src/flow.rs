//! Flows on the extended graph and flow-based optimality certificates.
//!
//! A [`Flow`] carries one value per base edge, oriented head to tail, and one
//! value per star edge. The star value of a sampled node `i` is the flow the
//! accumulator delivers to `i`, which is the base-graph divergence absorbed at
//! `i`. With that convention conservation at `i` reads
//! `divergence_i(base) = star_i`, conservation at the accumulator reads
//! `sum_i star_i = 0`, and the nLasso value on the cluster of `i` is
//! `label_i - star_i`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::graph::{EmpiricalGraph, ExtendedGraph, UnionFind};
use crate::signal::{is_boundary, GraphSignal, Observations, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    /// Per canonical base edge.
    pub base: Vec<f64>,
    /// Per star edge, aligned with [`ExtendedGraph::star_nodes`].
    pub star: Vec<f64>,
}

impl Flow {
    pub fn zeros(eg: &ExtendedGraph<'_>) -> Self {
        Self {
            base: vec![0.0; eg.base().edge_count()],
            star: vec![0.0; eg.star_count()],
        }
    }

    fn check_dims(&self, eg: &ExtendedGraph<'_>) -> Result<()> {
        check_len("base flow", eg.base().edge_count(), self.base.len())?;
        check_len("star flow", eg.star_count(), self.star.len())
    }
}

fn check_sampling(eg: &ExtendedGraph<'_>, obs: &Observations) -> Result<()> {
    if eg.star_nodes() == obs.nodes() {
        Ok(())
    } else {
        Err(Error::SamplingMismatch)
    }
}

/// Conservation and capacity part of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCheck {
    /// `max` over nodes and the accumulator of the absolute imbalance.
    pub conservation_residual: f64,
    /// Node with the largest imbalance; `None` when the accumulator is worst or all are zero.
    pub worst_node: Option<usize>,
    /// `|sum of star values|`, the imbalance at the accumulator.
    pub accumulator_residual: f64,
    /// `max_e (|y_e| - lambda W_e)` over base edges, clipped at zero.
    pub capacity_excess: f64,
    pub conservation_ok: bool,
    pub capacity_ok: bool,
}

impl FlowCheck {
    pub fn ok(&self) -> bool {
        self.conservation_ok && self.capacity_ok
    }
}

/// Checks conservation everywhere and capacities on base edges only.
pub fn check_flow(eg: &ExtendedGraph<'_>, f: &Flow, lambda: f64, tol: f64) -> Result<FlowCheck> {
    f.check_dims(eg)?;
    let g = eg.base();
    let mut imbalance = g.divergence(&f.base)?;
    for (&i, &s) in eg.star_nodes().iter().zip(&f.star) {
        imbalance[i - 1] -= s;
    }
    let (mut worst_node, mut node_residual) = (None, 0.0f64);
    for (k, d) in imbalance.iter().enumerate() {
        if d.abs() > node_residual {
            node_residual = d.abs();
            worst_node = Some(k + 1);
        }
    }
    let accumulator_residual = f.star.iter().sum::<f64>().abs();
    if accumulator_residual > node_residual {
        worst_node = None;
    }
    let conservation_residual = node_residual.max(accumulator_residual);
    let capacity_excess = g
        .edges()
        .iter()
        .zip(&f.base)
        .map(|(e, y)| y.abs() - lambda * e.weight)
        .fold(0.0f64, f64::max);
    Ok(FlowCheck {
        conservation_residual,
        worst_node,
        accumulator_residual,
        capacity_excess,
        conservation_ok: conservation_residual <= tol,
        capacity_ok: capacity_excess <= tol,
    })
}

/// Cost of the min-cost flow problem: `sum_{i in M} s_i (s_i / 2 - x_i)`.
pub fn mincost_objective(eg: &ExtendedGraph<'_>, f: &Flow, obs: &Observations) -> Result<f64> {
    f.check_dims(eg)?;
    check_sampling(eg, obs)?;
    Ok(f.star
        .iter()
        .zip(obs.labels())
        .map(|(&s, &x)| s * (0.5 * s - x))
        .sum())
}

/// Lifts a dual vector to the extended graph by discharging its divergence
/// at the sampled nodes through the star edges.
pub fn dual_to_extended_flow(
    g: &EmpiricalGraph,
    obs: &Observations,
    y: &[f64],
    tol: f64,
) -> Result<Flow> {
    obs.check_against(g.node_count())?;
    let div = g.divergence(y)?;
    for (k, d) in div.iter().enumerate() {
        if obs.label(k + 1).is_none() && d.abs() > tol {
            return Err(Error::NotDualFeasible {
                node: k + 1,
                residual: d.abs(),
            });
        }
    }
    Ok(Flow {
        base: y.to_vec(),
        star: obs.nodes().iter().map(|&i| div[i - 1]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Failed,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeResidual {
    pub head: usize,
    pub tail: usize,
    pub flow: f64,
    pub capacity: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationCheck {
    pub ok: bool,
    /// `||y_e| - lambda W_e|` for every boundary edge.
    pub edges: Vec<EdgeResidual>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorCheck {
    pub ok: bool,
    /// Smallest `lambda W_e - |y_e|` over non-boundary edges.
    pub min_slack: Option<f64>,
    pub worst_edge: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    Balanced,
    Unbalanced,
    /// No sampled node in the cluster.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterBalance {
    /// 1-based cluster index.
    pub cluster: usize,
    pub sampled: Vec<usize>,
    /// Spread of `label_i - star_i` over the sampled nodes of the cluster.
    pub spread: Option<f64>,
    pub status: ClusterStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceCheck {
    pub ok: bool,
    pub clusters: Vec<ClusterBalance>,
}

/// Direction of saturated edges against the jumps of the reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheck {
    pub ok: bool,
    /// Saturated edges whose flow points from the lower to the higher value.
    pub violations: Vec<EdgeResidual>,
}

/// Outcome of [`verify_certificate`] with every residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub verdict: Verdict,
    pub lambda: f64,
    pub tol: f64,
    pub flow: FlowCheck,
    pub saturation: SaturationCheck,
    pub strict_interior: InteriorCheck,
    pub balance: BalanceCheck,
    /// `None` when there is no reconstruction to compare against.
    pub sign_consistency: Option<SignCheck>,
    pub reconstructed: Option<GraphSignal>,
    pub reconstruction_error: Option<String>,
}

/// Checks a flow against the piecewise-constant optimality conditions.
///
/// Verified means: conservation and capacities hold, every boundary edge is
/// saturated, every other edge keeps at least `tol` slack, `label_i - star_i`
/// agrees within `tol` over the sampled nodes of each cluster, and every
/// saturated edge carries flow from the higher to the lower reconstructed value.
pub fn verify_certificate(
    eg: &ExtendedGraph<'_>,
    f: &Flow,
    partition: &Partition,
    obs: &Observations,
    lambda: f64,
    tol: f64,
) -> Result<CertificateReport> {
    let g = eg.base();
    check_sampling(eg, obs)?;
    check_len("partition nodes", g.node_count(), partition.node_count())?;
    let flow = check_flow(eg, f, lambda, tol)?;

    let mut saturation = SaturationCheck {
        ok: true,
        edges: Vec::new(),
    };
    let mut interior = InteriorCheck {
        ok: true,
        min_slack: None,
        worst_edge: None,
    };
    for (e, &y) in g.edges().iter().zip(&f.base) {
        let cap = lambda * e.weight;
        if is_boundary(partition, e) {
            let residual = (y.abs() - cap).abs();
            saturation.ok &= residual <= tol;
            saturation.edges.push(EdgeResidual {
                head: e.head,
                tail: e.tail,
                flow: y,
                capacity: cap,
                residual,
            });
        } else {
            let slack = cap - y.abs();
            if interior.min_slack.is_none_or(|m| slack < m) {
                interior.min_slack = Some(slack);
                interior.worst_edge = Some((e.head, e.tail));
            }
            interior.ok &= slack >= tol;
        }
    }

    let mut balance = BalanceCheck {
        ok: true,
        clusters: Vec::with_capacity(partition.cluster_count()),
    };
    for (k, cluster) in partition.clusters().iter().enumerate() {
        let sampled: Vec<usize> = cluster
            .iter()
            .copied()
            .filter(|&i| eg.star_slot(i).is_some())
            .collect();
        let levels = sampled.iter().map(|&i| {
            let slot = eg.star_slot(i).expect("sampled");
            obs.labels()[slot] - f.star[slot]
        });
        let (lo, hi) = levels.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let (spread, status) = if sampled.is_empty() {
            (None, ClusterStatus::Indeterminate)
        } else if hi - lo <= tol {
            (Some(hi - lo), ClusterStatus::Balanced)
        } else {
            (Some(hi - lo), ClusterStatus::Unbalanced)
        };
        balance.ok &= status == ClusterStatus::Balanced;
        balance.clusters.push(ClusterBalance {
            cluster: k + 1,
            sampled,
            spread,
            status,
        });
    }

    let (reconstructed, reconstruction_error, unsampled_component) =
        match reconstruct_unchecked(eg, f, obs, lambda, tol) {
            Ok(x) => (Some(x), None, false),
            Err(e) => {
                let unsampled = matches!(e, Reconstruction::Unsampled(_));
                (None, Some(e.to_string()), unsampled)
            }
        };
    let sign_consistency = reconstructed.as_ref().map(|x| {
        let violations: Vec<EdgeResidual> = g
            .edges()
            .iter()
            .zip(&f.base)
            .filter_map(|(e, &y)| {
                let cap = lambda * e.weight;
                let saturated = (y.abs() - cap).abs() <= tol;
                let jump = x.at(e.head) - x.at(e.tail);
                let residual = -(y.signum() * jump);
                (saturated && y != 0.0 && residual > tol).then_some(EdgeResidual {
                    head: e.head,
                    tail: e.tail,
                    flow: y,
                    capacity: cap,
                    residual,
                })
            })
            .collect();
        SignCheck {
            ok: violations.is_empty(),
            violations,
        }
    });

    let unbalanced = balance
        .clusters
        .iter()
        .any(|c| c.status == ClusterStatus::Unbalanced);
    let indeterminate = balance
        .clusters
        .iter()
        .any(|c| c.status == ClusterStatus::Indeterminate)
        || unsampled_component;
    let failed = !flow.ok()
        || !saturation.ok
        || !interior.ok
        || unbalanced
        || (reconstruction_error.is_some() && !unsampled_component)
        || sign_consistency.as_ref().is_some_and(|s| !s.ok);
    let verdict = if failed {
        Verdict::Failed
    } else if indeterminate {
        Verdict::Indeterminate
    } else {
        Verdict::Verified
    };
    Ok(CertificateReport {
        verdict,
        lambda,
        tol,
        flow,
        saturation,
        strict_interior: interior,
        balance,
        sign_consistency,
        reconstructed,
        reconstruction_error,
    })
}

#[derive(Debug)]
enum Reconstruction {
    Unsampled(usize),
    Inconsistent { a: usize, b: usize, diff: f64 },
}

impl std::fmt::Display for Reconstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reconstruction::Unsampled(i) => write!(
                f,
                "component of node {i} over non-saturated edges has no sampled node"
            ),
            Reconstruction::Inconsistent { a, b, diff } => write!(
                f,
                "sampled nodes {a} and {b} in one component give values differing by {diff:e}"
            ),
        }
    }
}

/// Reads the nLasso solution off a certificate flow.
///
/// Nodes joined by edges with `|y_e| < lambda W_e - tol` share a value, and a
/// component takes `label_i - divergence_i(base)` at its lowest sampled node.
/// The partition only enters through the preconditions established by
/// [`verify_certificate`]; it is checked for size here.
pub fn reconstruct_primal(
    eg: &ExtendedGraph<'_>,
    f: &Flow,
    partition: &Partition,
    obs: &Observations,
    lambda: f64,
    tol: f64,
) -> Result<GraphSignal> {
    check_sampling(eg, obs)?;
    check_len(
        "partition nodes",
        eg.base().node_count(),
        partition.node_count(),
    )?;
    reconstruct_unchecked(eg, f, obs, lambda, tol).map_err(|e| Error::Reconstruction(e.to_string()))
}

fn reconstruct_unchecked(
    eg: &ExtendedGraph<'_>,
    f: &Flow,
    obs: &Observations,
    lambda: f64,
    tol: f64,
) -> std::result::Result<GraphSignal, Reconstruction> {
    let g = eg.base();
    let n = g.node_count();
    let mut uf = UnionFind::new(n);
    for (e, &y) in g.edges().iter().zip(&f.base) {
        if y.abs() < lambda * e.weight - tol {
            uf.union(e.head - 1, e.tail - 1);
        }
    }
    let div = g.divergence(&f.base).expect("dimensions checked");
    // value and source node per component root, lowest sampled id first
    let mut value: Vec<Option<(f64, usize)>> = vec![None; n];
    for (i, label) in obs.iter() {
        let root = uf.find(i - 1);
        let v = label - div[i - 1];
        match value[root] {
            None => value[root] = Some((v, i)),
            Some((v0, i0)) => {
                if (v - v0).abs() > tol {
                    return Err(Reconstruction::Inconsistent {
                        a: i0,
                        b: i,
                        diff: (v - v0).abs(),
                    });
                }
            }
        }
    }
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        match value[uf.find(i)] {
            Some((v, _)) => x.push(v),
            None => return Err(Reconstruction::Unsampled(i + 1)),
        }
    }
    Ok(GraphSignal::new(x).expect("finite inputs"))
}

/// Builds a certificate flow on a tree for the partition's piecewise-constant model.
///
/// Each cluster's level is the mean of its labels. Boundary edges carry
/// `lambda W_e` from the higher-level side to the lower one (zero on ties).
/// Inside a cluster the sampled nodes absorb the net boundary inflow in equal
/// shares of `label_i - star_i`, so the balance condition holds by
/// construction, and the intra-cluster edge flows follow from conservation by
/// sweeping from the leaves to the lowest sampled node. The caller still has to
/// run [`verify_certificate`]: the interior slack condition is not guaranteed.
pub fn construct_tree_certificate(
    g: &EmpiricalGraph,
    partition: &Partition,
    obs: &Observations,
    lambda: f64,
) -> Result<Flow> {
    let n = g.node_count();
    check_len("partition nodes", n, partition.node_count())?;
    obs.check_against(n)?;
    if g.edge_count() + 1 != n {
        return Err(Error::NotATree(format!(
            "{} edges on {} nodes",
            g.edge_count(),
            n
        )));
    }
    let mut uf = UnionFind::new(n);
    for e in g.edges() {
        if !uf.union(e.head - 1, e.tail - 1) {
            return Err(Error::NotATree(format!(
                "edge {{{}, {}}} closes a cycle",
                e.head, e.tail
            )));
        }
    }

    let level: Vec<f64> = partition
        .clusters()
        .iter()
        .enumerate()
        .map(|(k, cluster)| {
            let labels: Vec<f64> = cluster.iter().filter_map(|&i| obs.label(i)).collect();
            if labels.is_empty() {
                Err(Error::UnsampledCluster(k + 1))
            } else {
                Ok(labels.iter().sum::<f64>() / labels.len() as f64)
            }
        })
        .collect::<Result<_>>()?;

    let mut base = vec![0.0; g.edge_count()];
    // divergence contributed by boundary edges
    let mut boundary_div = vec![0.0; n];
    for (k, e) in g.edges().iter().enumerate() {
        if is_boundary(partition, e) {
            let diff = level[partition.cluster_of(e.head)] - level[partition.cluster_of(e.tail)];
            let y = if diff > 0.0 {
                lambda * e.weight
            } else if diff < 0.0 {
                -lambda * e.weight
            } else {
                0.0
            };
            base[k] = y;
            boundary_div[e.head - 1] += y;
            boundary_div[e.tail - 1] -= y;
        }
    }

    // star values: equal label_i - star_i over the sampled nodes of each cluster
    let mut star_at = vec![0.0; n];
    for cluster in partition.clusters() {
        let inflow: f64 = cluster.iter().map(|&i| boundary_div[i - 1]).sum();
        let sampled: Vec<(usize, f64)> = cluster
            .iter()
            .filter_map(|&i| obs.label(i).map(|x| (i, x)))
            .collect();
        let value = (sampled.iter().map(|p| p.1).sum::<f64>() - inflow) / sampled.len() as f64;
        for (i, x) in sampled {
            star_at[i - 1] = x - value;
        }
    }

    // remaining divergence each node must get from intra-cluster edges
    let mut need: Vec<f64> = (0..n).map(|k| star_at[k] - boundary_div[k]).collect();
    for (k, cluster) in partition.clusters().iter().enumerate() {
        let root = *cluster
            .iter()
            .find(|&&i| obs.label(i).is_some())
            .expect("checked above");
        let mut parent_edge: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(cluster.len());
        let mut queue = VecDeque::from([root]);
        seen[root - 1] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &ei in g.incident_edges(u)? {
                let e = g.edges()[ei];
                if is_boundary(partition, &e) {
                    continue;
                }
                let v = if e.head == u { e.tail } else { e.head };
                if !seen[v - 1] {
                    seen[v - 1] = true;
                    parent_edge[v - 1] = Some(ei);
                    queue.push_back(v);
                }
            }
        }
        if order.len() != cluster.len() {
            return Err(Error::DisconnectedCluster(k + 1));
        }
        for &u in order.iter().skip(1).rev() {
            let ei = parent_edge[u - 1].expect("non-root has a parent");
            let e = g.edges()[ei];
            // contribution of the edge to div_u is +y if u is the head
            let y = if e.head == u {
                need[u - 1]
            } else {
                -need[u - 1]
            };
            base[ei] = y;
            need[u - 1] = 0.0;
            let p = if e.head == u { e.tail } else { e.head };
            need[p - 1] -= if e.head == p { y } else { -y };
        }
    }

    Ok(Flow {
        base,
        star: obs.nodes().iter().map(|&i| star_at[i - 1]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> EmpiricalGraph {
        EmpiricalGraph::new(
            10,
            (1..10).map(|i| (i, i + 1, if i == 5 { 0.25 } else { 1.0 })),
        )
        .unwrap()
    }

    fn obs() -> Observations {
        Observations::new([(2, 1.0), (7, 0.0)]).unwrap()
    }

    fn partition() -> Partition {
        Partition::new(10, vec![(1..=5).collect(), (6..=10).collect()]).unwrap()
    }

    fn certificate() -> Flow {
        Flow {
            base: (1..10)
                .map(|i| if (2..=6).contains(&i) { 0.25 } else { 0.0 })
                .collect(),
            star: vec![0.25, -0.25],
        }
    }

    #[test]
    fn check_flow_examples() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let zero = check_flow(&eg, &Flow::zeros(&eg), 1.0, 0.0).unwrap();
        assert_eq!(zero.conservation_residual, 0.0);
        assert!(zero.ok());

        let cert = check_flow(&eg, &certificate(), 1.0, 0.0).unwrap();
        assert_eq!(cert.conservation_residual, 0.0);
        assert!(cert.ok());

        let mut f = Flow::zeros(&eg);
        f.base[0] = 0.5;
        let c = check_flow(&eg, &f, 1.0, 1e-9).unwrap();
        assert_eq!(c.conservation_residual, 0.5);
        assert!(!c.conservation_ok);
        assert!(matches!(c.worst_node, Some(1) | Some(2)));

        assert!(check_flow(
            &eg,
            &Flow {
                base: vec![0.0; 8],
                star: vec![0.0; 2]
            },
            1.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn star_edges_are_uncapacitated() {
        let g = EmpiricalGraph::new(2, [(1, 2, 1.0)]).unwrap();
        let eg = g.extend(&[1, 2]).unwrap();
        let f = Flow {
            base: vec![1.0],
            star: vec![1.0, -1.0],
        };
        assert!(check_flow(&eg, &f, 1.0, 0.0).unwrap().ok());
        let big = Flow {
            base: vec![1.0],
            star: vec![50.0, -1.0],
        };
        let c = check_flow(&eg, &big, 1.0, 0.0).unwrap();
        assert!(c.capacity_ok);
        assert!(!c.conservation_ok);
    }

    #[test]
    fn mincost_examples() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        assert_eq!(
            mincost_objective(&eg, &Flow::zeros(&eg), &obs()).unwrap(),
            0.0
        );
        assert_eq!(
            mincost_objective(&eg, &certificate(), &obs()).unwrap(),
            -0.1875
        );
        let mut doubled = certificate();
        doubled.star.iter_mut().for_each(|s| *s *= 2.0);
        // 0.5 (0.25 - 1) + (-0.5)(-0.25) = -0.25
        assert_eq!(mincost_objective(&eg, &doubled, &obs()).unwrap(), -0.25);
        let other = Observations::new([(2, 1.0)]).unwrap();
        assert!(matches!(
            mincost_objective(&eg, &certificate(), &other),
            Err(Error::SamplingMismatch)
        ));
    }

    #[test]
    fn lifting_dual_vectors() {
        let g = chain();
        let f = dual_to_extended_flow(&g, &obs(), &certificate().base, 1e-9).unwrap();
        assert_eq!(f, certificate());
        let z = dual_to_extended_flow(&g, &obs(), &[0.0; 9], 1e-9).unwrap();
        assert_eq!(z.star, vec![0.0, 0.0]);
        let mut y = vec![0.0; 9];
        y[0] = 0.1;
        assert!(matches!(
            dual_to_extended_flow(&g, &obs(), &y, 1e-9),
            Err(Error::NotDualFeasible { node: 1, .. })
        ));
    }

    #[test]
    fn verifies_chain_certificate() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let r = verify_certificate(&eg, &certificate(), &partition(), &obs(), 1.0, 1e-9).unwrap();
        assert_eq!(r.verdict, Verdict::Verified, "{r:#?}");
        let x = r.reconstructed.unwrap();
        assert_eq!(
            x.values(),
            &[0.75, 0.75, 0.75, 0.75, 0.75, 0.25, 0.25, 0.25, 0.25, 0.25]
        );
    }

    #[test]
    fn wrong_lambda_breaks_saturation() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let r = verify_certificate(&eg, &certificate(), &partition(), &obs(), 2.0, 1e-9).unwrap();
        assert_eq!(r.verdict, Verdict::Failed);
        assert!(!r.saturation.ok);
        assert_eq!(r.saturation.edges[0].residual, 0.25);
    }

    #[test]
    fn unsampled_cluster_is_indeterminate() {
        // 4-cycle with a circulation saturating both boundary edges
        let g =
            EmpiricalGraph::new(4, [(1, 2, 1.0), (2, 3, 0.5), (3, 4, 1.0), (1, 4, 0.5)]).unwrap();
        let p = Partition::new(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
        let o = Observations::new([(1, 1.0)]).unwrap();
        let eg = g.extend(&[1]).unwrap();
        let f = Flow {
            base: vec![0.5, -0.5, 0.5, 0.5],
            star: vec![0.0],
        };
        let r = verify_certificate(&eg, &f, &p, &o, 1.0, 1e-9).unwrap();
        assert!(
            r.flow.ok() && r.saturation.ok && r.strict_interior.ok,
            "{r:#?}"
        );
        assert_eq!(r.balance.clusters[1].status, ClusterStatus::Indeterminate);
        assert_eq!(r.verdict, Verdict::Indeterminate);
    }

    #[test]
    fn reconstruction_examples() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let x = reconstruct_primal(&eg, &certificate(), &partition(), &obs(), 1.0, 1e-9).unwrap();
        assert_eq!(x.at(1), 0.75);
        assert_eq!(x.at(10), 0.25);

        // every edge saturated, every node sampled: singleton components
        let p = EmpiricalGraph::new(3, [(1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let all = Observations::new([(1, 2.0), (2, 0.0), (3, -2.0)]).unwrap();
        let ep = p.extend(&[1, 2, 3]).unwrap();
        let f = Flow {
            base: vec![1.0, 1.0],
            star: vec![1.0, 0.0, -1.0],
        };
        let singletons = Partition::new(3, vec![vec![1], vec![2], vec![3]]).unwrap();
        let x = reconstruct_primal(&ep, &f, &singletons, &all, 1.0, 1e-9).unwrap();
        assert_eq!(x.values(), &[1.0, 0.0, -1.0]);

        // component {6..10} carries no sample
        let o = Observations::new([(2, 1.0)]).unwrap();
        let e2 = g.extend(&[2]).unwrap();
        let f = Flow {
            base: certificate().base,
            star: vec![0.25],
        };
        assert!(matches!(
            reconstruct_primal(&e2, &f, &partition(), &o, 1.0, 1e-9),
            Err(Error::Reconstruction(_))
        ));
    }

    #[test]
    fn tree_certificate_on_chain() {
        let g = chain();
        let f = construct_tree_certificate(&g, &partition(), &obs(), 1.0).unwrap();
        assert_eq!(f, certificate());
    }

    #[test]
    fn tree_certificate_single_cluster_equal_labels() {
        let g =
            EmpiricalGraph::new(5, [(1, 2, 1.0), (2, 3, 2.0), (2, 4, 1.0), (4, 5, 0.5)]).unwrap();
        let p = Partition::new(5, vec![(1..=5).collect()]).unwrap();
        let o = Observations::new([(1, 3.0), (5, 3.0)]).unwrap();
        let f = construct_tree_certificate(&g, &p, &o, 1.0).unwrap();
        assert!(f.base.iter().all(|&v| v == 0.0));
        assert!(f.star.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tree_certificate_balances_multiple_samples() {
        // star-shaped tree, two clusters, two samples in the first
        let g = EmpiricalGraph::new(
            6,
            [
                (1, 2, 1.0),
                (1, 3, 1.0),
                (3, 4, 0.5),
                (4, 5, 1.0),
                (4, 6, 1.0),
            ],
        )
        .unwrap();
        let p = Partition::new(6, vec![vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let o = Observations::new([(2, 1.0), (3, 0.8), (6, -1.0)]).unwrap();
        let f = construct_tree_certificate(&g, &p, &o, 0.5).unwrap();
        let eg = g.extend(o.nodes()).unwrap();
        let r = verify_certificate(&eg, &f, &p, &o, 0.5, 1e-9).unwrap();
        assert!(r.flow.ok(), "{r:#?}");
        assert_eq!(r.balance.clusters[0].status, ClusterStatus::Balanced);
        assert_eq!(r.verdict, Verdict::Verified, "{r:#?}");
    }

    #[test]
    fn tree_certificate_errors() {
        let cycle = EmpiricalGraph::new(3, [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]).unwrap();
        let p = Partition::new(3, vec![vec![1, 2, 3]]).unwrap();
        let o = Observations::new([(1, 1.0)]).unwrap();
        assert!(matches!(
            construct_tree_certificate(&cycle, &p, &o, 1.0),
            Err(Error::NotATree(_))
        ));
        let forest = EmpiricalGraph::new(4, [(1, 2, 1.0), (3, 4, 1.0), (1, 3, 1.0)]).unwrap();
        let split = Partition::new(4, vec![vec![1, 4], vec![2, 3]]).unwrap();
        let o2 = Observations::new([(1, 1.0), (2, 0.0)]).unwrap();
        assert!(matches!(
            construct_tree_certificate(&forest, &split, &o2, 1.0),
            Err(Error::DisconnectedCluster(1))
        ));
        let unsampled = Partition::new(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert!(matches!(
            construct_tree_certificate(&forest, &unsampled, &o2, 1.0),
            Err(Error::UnsampledCluster(2))
        ));
    }

    #[test]
    fn sign_check_rejects_reversed_saturation() {
        // lambda = 4: the tree construction saturates the boundary edge with
        // flow 1, the reconstruction jumps upwards across it (0 then 1), which
        // contradicts the flow direction, so the flow is not optimal
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let f = construct_tree_certificate(&g, &partition(), &obs(), 4.0).unwrap();
        let r = verify_certificate(&eg, &f, &partition(), &obs(), 4.0, 1e-9).unwrap();
        assert!(r.saturation.ok && r.strict_interior.ok && r.balance.ok);
        assert_eq!(r.verdict, Verdict::Failed);
        assert!(!r.sign_consistency.unwrap().ok);
    }
}
