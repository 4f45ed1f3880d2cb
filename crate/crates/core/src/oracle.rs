//! Small-instance reference solvers.
//!
//! These are deliberately slow and simple and share nothing with the
//! primal-dual iteration beyond objective evaluation: the primal problem is
//! attacked by a plain subgradient method, the flow problem by an augmented
//! Lagrangian with projected-gradient inner loops and a dense final projection.
//! Meant for graphs with a dozen nodes or so.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::flow::{mincost_objective, Flow};
use crate::graph::{EmpiricalGraph, ExtendedGraph};
use crate::signal::{primal_objective, GraphSignal, Observations};

/// A certified result differs from the best dual bound by at most this much.
pub const CERTIFY_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub x: GraphSignal,
    pub objective: f64,
    pub method: &'static str,
    pub iterations: usize,
    /// Best dual bound available (from [`oracle_mincost_flow`]).
    pub dual_bound: f64,
    /// `objective - dual_bound <= CERTIFY_TOL`.
    pub certified: bool,
}

/// Minimises the nLasso objective by subgradient descent.
///
/// Step `c / sqrt(t)`, subgradient 0 at the kinks of `|.|`, and the estimate
/// is the better of the best iterate and the average of the second half of
/// the iterates.
pub fn oracle_nlasso(
    g: &EmpiricalGraph,
    obs: &Observations,
    lambda: f64,
    budget: usize,
) -> Result<OracleResult> {
    obs.check_against(g.node_count())?;
    if budget == 0 {
        return Err(Error::InvalidConfig(
            "oracle budget must be positive".into(),
        ));
    }
    let n = g.node_count();
    let labels: Vec<f64> = obs.labels().to_vec();
    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;

    let mut weight_sum = vec![0.0; n];
    for e in g.edges() {
        weight_sum[e.head - 1] += e.weight;
        weight_sum[e.tail - 1] += e.weight;
    }
    let range = (hi - lo).max(1e-3);
    let radius = range * (n as f64).sqrt();
    let lipschitz = weight_sum
        .iter()
        .map(|w| (range + lambda * w).powi(2))
        .sum::<f64>()
        .sqrt();
    // the usual radius / Lipschitz choice, shrunk: the error floor scales with c
    let c = 0.03 * radius / lipschitz;

    let objective = |x: &[f64]| -> f64 {
        let mut v = 0.0;
        for (i, label) in obs.iter() {
            v += 0.5 * (x[i - 1] - label).powi(2);
        }
        for e in g.edges() {
            v += lambda * e.weight * (x[e.head - 1] - x[e.tail - 1]).abs();
        }
        v
    };

    let mut x = vec![mean; n];
    let mut sub = vec![0.0; n];
    let mut best = x.clone();
    let mut best_val = objective(&x);
    let mut avg = vec![0.0; n];
    let mut avg_count = 0usize;
    let tail_start = budget / 2;
    for t in 1..=budget {
        sub.iter_mut().for_each(|s| *s = 0.0);
        for (i, label) in obs.iter() {
            sub[i - 1] += x[i - 1] - label;
        }
        for e in g.edges() {
            let d = x[e.head - 1] - x[e.tail - 1];
            let s = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            sub[e.head - 1] += lambda * e.weight * s;
            sub[e.tail - 1] -= lambda * e.weight * s;
        }
        let step = c / (t as f64).sqrt();
        for (xi, si) in x.iter_mut().zip(&sub) {
            *xi -= step * si;
        }
        if t > tail_start {
            avg_count += 1;
            let w = 1.0 / avg_count as f64;
            for (a, xi) in avg.iter_mut().zip(&x) {
                *a += w * (xi - *a);
            }
        }
        // checking every iterate would dominate the cost
        if t % 16 == 0 {
            let v = objective(&x);
            if v < best_val {
                best_val = v;
                best.copy_from_slice(&x);
            }
        }
    }
    let avg_val = objective(&avg);
    let x_out = if avg_val <= best_val { avg } else { best };
    let x_out = GraphSignal::new(x_out)?;
    let value = primal_objective(g, obs, &x_out, lambda)?;

    let eg = g.extend(obs.nodes())?;
    let flow = oracle_mincost_flow(&eg, obs, lambda, budget)?;
    let dual_bound = -flow.objective;
    Ok(OracleResult {
        x: x_out,
        objective: value,
        method: "subgradient",
        iterations: budget,
        dual_bound,
        certified: value - dual_bound <= CERTIFY_TOL,
    })
}

#[derive(Debug, Clone)]
pub struct OracleFlowResult {
    /// Exactly conserving flow within the capacity box.
    pub flow: Flow,
    pub objective: f64,
    pub iterations: usize,
    /// Inner and outer loops met their tolerances within the budget.
    pub converged: bool,
}

/// Solves the min-cost flow problem on the extended graph.
///
/// Star values are eliminated (`star_i = divergence_i`), leaving a quadratic in
/// the base flow over the capacity box with linear constraints
/// `divergence_i = 0` at unsampled nodes. The constraints go into an augmented
/// Lagrangian whose subproblems are solved by projected gradient; a dense
/// least-squares projection and a rescaling into the box make the final flow
/// exactly feasible.
pub fn oracle_mincost_flow(
    eg: &ExtendedGraph<'_>,
    obs: &Observations,
    lambda: f64,
    budget: usize,
) -> Result<OracleFlowResult> {
    if eg.star_nodes() != obs.nodes() {
        return Err(Error::SamplingMismatch);
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let g = eg.base();
    let n = g.node_count();
    let m = g.edge_count();
    let cap: Vec<f64> = g.edges().iter().map(|e| lambda * e.weight).collect();
    let label: Vec<Option<f64>> = (1..=n).map(|i| obs.label(i)).collect();

    let max_degree = (1..=n)
        .map(|i| g.degree(i).unwrap_or(0))
        .max()
        .unwrap_or(0)
        .max(1);
    let rho: f64 = 1.0;
    let step = 1.0 / (2.0 * max_degree as f64 * rho.max(1.0));

    let node_div = |y: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (e, ye) in g.edges().iter().zip(y) {
            v[e.head - 1] += ye;
            v[e.tail - 1] -= ye;
        }
        v
    };

    let mut y = vec![0.0; m];
    let mut mult = vec![0.0; n];
    let mut used = 0usize;
    let mut converged = false;
    'outer: while used < budget {
        let mut inner_done = false;
        while used < budget {
            used += 1;
            let v = node_div(&y);
            let w: Vec<f64> = (0..n)
                .map(|k| match label[k] {
                    Some(x) => v[k] - x,
                    None => mult[k] + rho * v[k],
                })
                .collect();
            let mut change = 0.0f64;
            for (k, e) in g.edges().iter().enumerate() {
                let grad = w[e.head - 1] - w[e.tail - 1];
                let next = (y[k] - step * grad).clamp(-cap[k], cap[k]);
                change = change.max((next - y[k]).abs());
                y[k] = next;
            }
            if change <= 1e-14 {
                inner_done = true;
                break;
            }
        }
        let v = node_div(&y);
        let mut violation = 0.0f64;
        for k in 0..n {
            if label[k].is_none() {
                mult[k] += rho * v[k];
                violation = violation.max(v[k].abs());
            }
        }
        if inner_done && violation <= 1e-12 {
            converged = true;
            break 'outer;
        }
    }

    let y = dense_feasible_projection(g, &label, &y, &cap);
    let v = node_div(&y);
    let flow = Flow {
        base: y,
        star: obs.nodes().iter().map(|&i| v[i - 1]).collect(),
    };
    let objective = mincost_objective(eg, &flow, obs)?;
    Ok(OracleFlowResult {
        flow,
        objective,
        iterations: used,
        converged,
    })
}

/// Removes divergence at unlabelled nodes by a dense least-squares projection,
/// then shrinks towards zero until every capacity holds.
fn dense_feasible_projection(
    g: &EmpiricalGraph,
    label: &[Option<f64>],
    y: &[f64],
    cap: &[f64],
) -> Vec<f64> {
    let m = g.edge_count();
    let free: Vec<usize> = (0..label.len()).filter(|&k| label[k].is_none()).collect();
    let mut out = DVector::from_column_slice(y);
    if !free.is_empty() && m > 0 {
        // columns of the incidence matrix for the unlabelled nodes
        let a = DMatrix::from_fn(m, free.len(), |e, c| {
            let edge = g.edges()[e];
            let node = free[c] + 1;
            if edge.head == node {
                1.0
            } else if edge.tail == node {
                -1.0
            } else {
                0.0
            }
        });
        let gram = a.transpose() * &a;
        let pinv = gram
            .pseudo_inverse(1e-12)
            .expect("pseudo-inverse of a symmetric matrix");
        let correction = &a * (pinv * (a.transpose() * &out));
        out -= correction;
    }
    let mut out: Vec<f64> = out.iter().copied().collect();
    let scale = out
        .iter()
        .zip(cap)
        .filter(|(v, _)| v.abs() > 0.0)
        .map(|(v, c)| c / v.abs())
        .fold(1.0f64, f64::min);
    for (v, c) in out.iter_mut().zip(cap) {
        *v *= scale;
        *v = v.clamp(-c, *c);
    }
    out
}

/// Dense reference for [`EmpiricalGraph::scaled_operator_norm`] via a full
/// symmetric eigendecomposition.
pub fn dense_scaled_operator_norm(g: &EmpiricalGraph) -> Result<f64> {
    if let Some(i) = g.isolated_node() {
        return Err(Error::IsolatedNode(i));
    }
    let n = g.node_count();
    let m = g.edge_count();
    let b = DMatrix::from_fn(m, n, |e, i| {
        let edge = g.edges()[e];
        if edge.head == i + 1 {
            1.0
        } else if edge.tail == i + 1 {
            -1.0
        } else {
            0.0
        }
    });
    let gamma_half = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (1.0 / g.degree(i + 1).expect("in range") as f64).sqrt()
        } else {
            0.0
        }
    });
    let a = gamma_half * b.transpose() * 0.5f64.sqrt();
    let gram = &a * a.transpose();
    let eig = SymmetricEigen::new(gram);
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .sqrt())
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

    #[test]
    fn nlasso_oracle_on_chain() {
        let r = oracle_nlasso(&chain(), &obs(), 1.0, 1_000_000).unwrap();
        assert!((r.objective - 0.1875).abs() <= 1e-3, "{}", r.objective);
        for i in 1..=10 {
            let want = if i <= 5 { 0.75 } else { 0.25 };
            assert!((r.x.at(i) - want).abs() <= 1e-2, "node {i}: {}", r.x.at(i));
        }
        assert!(r.certified);
    }

    #[test]
    fn nlasso_oracle_constant_labels() {
        let g = EmpiricalGraph::new(3, [(1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let o = Observations::new([(1, 2.0), (2, 2.0), (3, 2.0)]).unwrap();
        let r = oracle_nlasso(&g, &o, 1.0, 1000).unwrap();
        assert_eq!(r.x.values(), &[2.0, 2.0, 2.0]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn nlasso_oracle_single_node() {
        let g = EmpiricalGraph::new(1, std::iter::empty()).unwrap();
        let o = Observations::new([(1, -1.5)]).unwrap();
        let r = oracle_nlasso(&g, &o, 1.0, 100).unwrap();
        assert_eq!(r.x.values(), &[-1.5]);
        assert!(r.certified);
    }

    #[test]
    fn mincost_oracle_on_chain() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let r = oracle_mincost_flow(&eg, &obs(), 1.0, 1_000_000).unwrap();
        assert!(r.converged);
        assert!((r.objective + 0.1875).abs() <= 1e-4, "{}", r.objective);
        for (k, y) in r.flow.base.iter().enumerate() {
            let want = if (1..=5).contains(&k) { 0.25 } else { 0.0 };
            assert!((y - want).abs() <= 1e-2, "edge {k}: {y}");
        }
    }

    #[test]
    fn mincost_oracle_zero_capacity() {
        let g = chain();
        let eg = g.extend(&[2, 7]).unwrap();
        let r = oracle_mincost_flow(&eg, &obs(), 0.0, 10_000).unwrap();
        assert!(r.flow.base.iter().all(|&v| v == 0.0));
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn dense_norm_matches_closed_forms() {
        let pair = EmpiricalGraph::new(2, [(1, 2, 1.0)]).unwrap();
        assert!((dense_scaled_operator_norm(&pair).unwrap() - 1.0).abs() < 1e-12);
        let tri = EmpiricalGraph::new(3, [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]).unwrap();
        assert!((dense_scaled_operator_norm(&tri).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
    }
}
