//! Primal-dual splitting for the network Lasso.
//!
//! The iteration works on a node vector `x` and an edge vector `y`. Each step
//! extrapolates the primal iterate, takes a dual ascent step of size 1/2 on every
//! edge, projects onto the capacity box `|y_e| <= lambda W_e`, takes a primal
//! descent step with `gamma_i = 1/d_i`, applies the closed-form proximal step of
//! the squared label error on the sampling set, and updates a running average of
//! the primal iterates. The running average is the returned estimate.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{dot, EmpiricalGraph};
use crate::signal::{primal_objective, GraphSignal, Observations};

/// Cadence (in iterations) of the duality-gap stopping test in [`run`].
pub const GAP_CHECK_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub gap_tol: f64,
    #[serde(default = "default_feas_tol")]
    pub feas_tol: f64,
}

fn default_feas_tol() -> f64 {
    1e-9
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iters: 1000,
            gap_tol: 0.0,
            feas_tol: default_feas_tol(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.gap_tol.is_nan() || self.gap_tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gap_tol must be >= 0, got {}",
                self.gap_tol
            )));
        }
        if self.feas_tol.is_nan() || self.feas_tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "feas_tol must be >= 0, got {}",
                self.feas_tol
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Iterates of the primal-dual method.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x_curr: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub y: Vec<f64>,
    pub x_avg: Vec<f64>,
    /// Number of completed steps.
    pub k: usize,
}

/// Zero state; fails on graphs with an isolated node.
pub fn init_state(g: &EmpiricalGraph, obs: &Observations) -> Result<SolverState> {
    check_problem(g, obs)?;
    let n = g.node_count();
    Ok(SolverState {
        x_curr: vec![0.0; n],
        x_prev: vec![0.0; n],
        y: vec![0.0; g.edge_count()],
        x_avg: vec![0.0; n],
        k: 0,
    })
}

fn check_problem(g: &EmpiricalGraph, obs: &Observations) -> Result<()> {
    if let Some(i) = g.isolated_node() {
        return Err(Error::IsolatedNode(i));
    }
    obs.check_against(g.node_count())
}

/// One instance of the iteration, bound to a problem, with scratch buffers.
#[derive(Debug)]
pub struct PrimalDual<'a> {
    graph: &'a EmpiricalGraph,
    obs: &'a Observations,
    config: SolverConfig,
    /// `1/d_i` per node.
    step: Vec<f64>,
    /// `lambda * W_e` per edge.
    capacity: Vec<f64>,
    extrapolated: Vec<f64>,
    div: Vec<f64>,
}

impl<'a> PrimalDual<'a> {
    pub fn new(
        graph: &'a EmpiricalGraph,
        obs: &'a Observations,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        check_problem(graph, obs)?;
        debug_assert!(
            graph.scaled_operator_norm()? <= 1.0 + 1e-6,
            "step sizes violate the operator-norm bound"
        );
        let step = graph.degrees().iter().map(|&d| 1.0 / d as f64).collect();
        let capacity = graph
            .edges()
            .iter()
            .map(|e| config.lambda * e.weight)
            .collect();
        let n = graph.node_count();
        Ok(Self {
            graph,
            obs,
            config,
            step,
            capacity,
            extrapolated: vec![0.0; n],
            div: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn init_state(&self) -> SolverState {
        let n = self.graph.node_count();
        SolverState {
            x_curr: vec![0.0; n],
            x_prev: vec![0.0; n],
            y: vec![0.0; self.graph.edge_count()],
            x_avg: vec![0.0; n],
            k: 0,
        }
    }

    fn check_state(&self, state: &SolverState) -> Result<()> {
        let n = self.graph.node_count();
        check_len("x_curr", n, state.x_curr.len())?;
        check_len("x_prev", n, state.x_prev.len())?;
        check_len("x_avg", n, state.x_avg.len())?;
        check_len("y", self.graph.edge_count(), state.y.len())
    }

    /// Advances `state` by one iteration.
    pub fn step(&mut self, state: &mut SolverState) -> Result<()> {
        self.check_state(state)?;
        let g = self.graph;

        for ((t, &cur), &prev) in self
            .extrapolated
            .iter_mut()
            .zip(&state.x_curr)
            .zip(&state.x_prev)
        {
            *t = 2.0 * cur - prev;
        }

        for ((y, e), &cap) in state.y.iter_mut().zip(g.edges()).zip(&self.capacity) {
            *y += 0.5 * (self.extrapolated[e.head - 1] - self.extrapolated[e.tail - 1]);
            // box projection; clamping keeps |y| <= cap exact in floating point
            if y.abs() > cap {
                *y = cap.copysign(*y);
            }
        }

        g.divergence_into(&state.y, &mut self.div);
        std::mem::swap(&mut state.x_prev, &mut state.x_curr);
        for i in 0..state.x_curr.len() {
            state.x_curr[i] = state.x_prev[i] - self.step[i] * self.div[i];
        }
        for (i, label) in self.obs.iter() {
            let gamma = self.step[i - 1];
            let x = &mut state.x_curr[i - 1];
            *x = (gamma * label + *x) / (gamma + 1.0);
        }

        state.k += 1;
        let w = 1.0 / state.k as f64;
        for (avg, &x) in state.x_avg.iter_mut().zip(&state.x_curr) {
            *avg = (1.0 - w) * *avg + w * x;
        }
        Ok(())
    }

    /// Runs until `max_iters` or until the certified gap drops to `gap_tol`.
    ///
    /// With `gap_tol == 0` the method runs a fixed number of iterations.
    pub fn run(&mut self) -> Result<SolveOutcome> {
        let mut state = self.init_state();
        let mut last_gap = None;
        while state.k < self.config.max_iters {
            self.step(&mut state)?;
            if self.config.gap_tol > 0.0 && state.k.is_multiple_of(GAP_CHECK_EVERY) {
                let gap = self.certified_gap(&state)?;
                let done = matches!(gap.0, GapValue::Certified(v) if v <= self.config.gap_tol);
                last_gap = Some(gap);
                if done {
                    break;
                }
            }
        }
        let (gap, certified_dual) = match last_gap {
            Some(g) if g.2 == state.k => (g.0, g.1),
            _ => {
                let g = self.certified_gap(&state)?;
                (g.0, g.1)
            }
        };
        let x_avg = GraphSignal::new(state.x_avg)?;
        let primal = primal_objective(self.graph, self.obs, &x_avg, self.config.lambda)?;
        let dual = match dual_objective(
            self.graph,
            self.obs,
            &certified_dual,
            self.config.lambda,
            self.config.feas_tol,
        )? {
            DualValue::Feasible(d) => Some(d),
            DualValue::Infeasible(_) => None,
        };
        let raw_residual = feasibility_residual(self.graph, self.obs, &state.y, self.config.lambda);
        Ok(SolveOutcome {
            x_avg,
            y: state.y,
            iters: state.k,
            gap,
            primal_objective: primal,
            dual_objective: dual,
            certified_dual,
            raw_dual_residual: raw_residual,
        })
    }

    fn certified_gap(&self, state: &SolverState) -> Result<(GapValue, Vec<f64>, usize)> {
        let restored =
            restore_dual_feasibility(self.graph, self.obs, &state.y, self.config.lambda)?;
        let x = GraphSignal::new(state.x_avg.clone())?;
        let gap = duality_gap(
            self.graph,
            self.obs,
            &x,
            &restored,
            self.config.lambda,
            self.config.feas_tol,
        )?;
        Ok((gap, restored, state.k))
    }
}

/// Functional form of a single step.
pub fn pd_step(
    state: &SolverState,
    g: &EmpiricalGraph,
    obs: &Observations,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    let mut solver = PrimalDual::new(g, obs, *cfg)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Averaged primal iterate.
    pub x_avg: GraphSignal,
    /// Final raw dual iterate.
    pub y: Vec<f64>,
    pub iters: usize,
    /// Gap between `x_avg` and `certified_dual`.
    pub gap: GapValue,
    pub primal_objective: f64,
    pub dual_objective: Option<f64>,
    /// Feasible dual point obtained from `y` by [`restore_dual_feasibility`].
    pub certified_dual: Vec<f64>,
    /// Feasibility residuals of the raw iterate `y`.
    pub raw_dual_residual: Infeasibility,
}

pub fn run(g: &EmpiricalGraph, obs: &Observations, cfg: &SolverConfig) -> Result<SolveOutcome> {
    PrimalDual::new(g, obs, *cfg)?.run()
}

/// How far an edge vector is from dual feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Infeasibility {
    /// `max_e (|y_e| - lambda W_e)`, clipped at zero.
    pub capacity_excess: f64,
    /// Edge index attaining `capacity_excess`, if positive.
    pub worst_edge: Option<usize>,
    /// Largest `|divergence_i(y)|` over unsampled nodes.
    pub divergence_residual: f64,
    /// Node attaining `divergence_residual`, if positive.
    pub worst_node: Option<usize>,
}

impl Infeasibility {
    pub fn max(&self) -> f64 {
        self.capacity_excess.max(self.divergence_residual)
    }
}

pub fn feasibility_residual(
    g: &EmpiricalGraph,
    obs: &Observations,
    y: &[f64],
    lambda: f64,
) -> Infeasibility {
    let mut res = Infeasibility {
        capacity_excess: 0.0,
        worst_edge: None,
        divergence_residual: 0.0,
        worst_node: None,
    };
    for (k, (e, &ye)) in g.edges().iter().zip(y).enumerate() {
        let excess = ye.abs() - lambda * e.weight;
        if excess > res.capacity_excess {
            res.capacity_excess = excess;
            res.worst_edge = Some(k);
        }
    }
    let mut div = vec![0.0; g.node_count()];
    g.divergence_into(y, &mut div);
    for (k, &d) in div.iter().enumerate() {
        if obs.label(k + 1).is_none() && d.abs() > res.divergence_residual {
            res.divergence_residual = d.abs();
            res.worst_node = Some(k + 1);
        }
    }
    res
}

/// Dual objective value, or the residuals that make `y` infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum DualValue {
    Feasible(f64),
    Infeasible(Infeasibility),
}

/// `D(y) = sum_{i in M} (v_i x_i - v_i^2 / 2)` with `v = divergence(y)`.
///
/// The conjugates of the two primal terms are `+inf` unless every capacity holds
/// and the divergence vanishes at unsampled nodes; both are tested against
/// `feas_tol`.
pub fn dual_objective(
    g: &EmpiricalGraph,
    obs: &Observations,
    y: &[f64],
    lambda: f64,
    feas_tol: f64,
) -> Result<DualValue> {
    check_len("edge vector", g.edge_count(), y.len())?;
    obs.check_against(g.node_count())?;
    let res = feasibility_residual(g, obs, y, lambda);
    if res.capacity_excess > feas_tol || res.divergence_residual > feas_tol {
        return Ok(DualValue::Infeasible(res));
    }
    let div = g.divergence(y)?;
    Ok(DualValue::Feasible(
        obs.iter()
            .map(|(i, label)| {
                let v = div[i - 1];
                v * label - 0.5 * v * v
            })
            .sum(),
    ))
}

/// Upper bound on the suboptimality of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum GapValue {
    Certified(f64),
    NotCertified(Infeasibility),
}

impl GapValue {
    pub fn certified(&self) -> Option<f64> {
        match self {
            GapValue::Certified(v) => Some(*v),
            GapValue::NotCertified(_) => None,
        }
    }
}

/// `L(x) - D(y)` when `y` is dual feasible within `feas_tol`.
pub fn duality_gap(
    g: &EmpiricalGraph,
    obs: &Observations,
    x: &GraphSignal,
    y: &[f64],
    lambda: f64,
    feas_tol: f64,
) -> Result<GapValue> {
    let primal = primal_objective(g, obs, x, lambda)?;
    Ok(match dual_objective(g, obs, y, lambda, feas_tol)? {
        DualValue::Feasible(d) => GapValue::Certified(primal - d),
        DualValue::Infeasible(res) => GapValue::NotCertified(res),
    })
}

/// Maps an edge vector to a dual-feasible one.
///
/// First removes the divergence at unsampled nodes by an orthogonal projection
/// onto `{y : divergence_i(y) = 0 for i not in M}` (a grounded-Laplacian solve by
/// conjugate gradients), then scales the result into the capacity box. Both
/// steps are continuous and leave feasible inputs unchanged, so the output
/// converges to the limit of a convergent dual sequence.
pub fn restore_dual_feasibility(
    g: &EmpiricalGraph,
    obs: &Observations,
    y: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    check_len("edge vector", g.edge_count(), y.len())?;
    obs.check_against(g.node_count())?;
    let n = g.node_count();
    let free: Vec<bool> = (1..=n).map(|i| obs.label(i).is_none()).collect();

    let mut rhs = g.divergence(y)?;
    mask(&mut rhs, &free);
    let z = grounded_laplacian_solve(g, &free, &rhs);
    let bz = g.incidence_apply(&z)?;
    let mut out: Vec<f64> = y.iter().zip(&bz).map(|(a, b)| a - b).collect();

    let scale = g
        .edges()
        .iter()
        .zip(&out)
        .filter(|(_, v)| v.abs() > 0.0)
        .map(|(e, v)| lambda * e.weight / v.abs())
        .fold(1.0f64, f64::min);
    if scale < 1.0 {
        out.iter_mut().for_each(|v| *v *= scale);
    }
    for (v, e) in out.iter_mut().zip(g.edges()) {
        let cap = lambda * e.weight;
        if v.abs() > cap {
            *v = cap.copysign(*v);
        }
    }
    Ok(out)
}

fn mask(v: &mut [f64], keep: &[bool]) {
    for (x, &k) in v.iter_mut().zip(keep) {
        if !k {
            *x = 0.0;
        }
    }
}

/// Conjugate gradients on the Laplacian restricted to the `free` nodes.
fn grounded_laplacian_solve(g: &EmpiricalGraph, free: &[bool], rhs: &[f64]) -> Vec<f64> {
    let n = g.node_count();
    let apply = |v: &[f64], out: &mut [f64], edge_buf: &mut [f64]| {
        g.incidence_apply_into(v, edge_buf);
        g.divergence_into(edge_buf, out);
        mask(out, free);
    };
    let mut edge_buf = vec![0.0; g.edge_count()];
    let mut z = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = 1e-30 * rr.max(1e-300);
    for _ in 0..(10 * n + 100) {
        if rr <= target || rr == 0.0 {
            break;
        }
        apply(&p, &mut ap, &mut edge_buf);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            z[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    z
}
