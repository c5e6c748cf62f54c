//! Coordinator steps of the consensus ADMM iteration, run on the subject
//! agent: the coordination QP with soft headway constraints, the dual update
//! and the residual-based stopping test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::qp::{DiagonalQp, KktResiduals};

/// `follower` must stay at least `d_hw` behind `leader` in path coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadwayEdge {
    pub follower: usize,
    pub leader: usize,
    /// Linear cost on this edge's slack variable.
    pub slack_weight: f64,
    /// Edge is dropped once the lane change has been completed.
    pub until_lane_change_done: bool,
}

/// Granularity of the headway slack variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackMode {
    /// One slack per edge, shared by all stages.
    #[default]
    PerEdge,
    /// One slack per edge and stage.
    PerStage,
}

impl SlackMode {
    /// Number of slack variables for `n_edges` edges over `horizon` stages.
    pub fn count(self, n_edges: usize, horizon: usize) -> usize {
        match self {
            SlackMode::PerEdge => n_edges,
            SlackMode::PerStage => n_edges * horizon,
        }
    }

    /// Slack index of edge `k` (position in the active list) at `stage`.
    pub fn index(self, k: usize, stage: usize, horizon: usize) -> usize {
        match self {
            SlackMode::PerEdge => k,
            SlackMode::PerStage => k * horizon + stage,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadwayGraph {
    pub edges: Vec<HeadwayEdge>,
    pub d_hw: f64,
    pub slack: SlackMode,
}

impl HeadwayGraph {
    pub fn new(edges: Vec<HeadwayEdge>, d_hw: f64, n_agents: usize) -> Result<Self> {
        if !(d_hw > 0.0) {
            return Err(Error::invalid("headway.d_hw_m", "must be positive"));
        }
        for e in &edges {
            if e.follower == e.leader {
                return Err(Error::invalid("headway.edges", "self-edges are not allowed"));
            }
            if e.follower >= n_agents || e.leader >= n_agents {
                return Err(Error::invalid("headway.edges", "edge references an unknown agent"));
            }
            if !(e.slack_weight > 0.0) {
                return Err(Error::invalid("headway.edges.slack_weight", "must be positive"));
            }
        }
        let graph = Self { edges, d_hw, slack: SlackMode::PerEdge };
        if graph.has_cycle(n_agents) {
            return Err(Error::invalid("headway.edges", "preceding-agent relation must be acyclic"));
        }
        Ok(graph)
    }

    pub fn with_slack(mut self, slack: SlackMode) -> Self {
        self.slack = slack;
        self
    }

    fn has_cycle(&self, n_agents: usize) -> bool {
        // Kahn's algorithm on follower -> leader.
        let mut indegree = vec![0usize; n_agents];
        for e in &self.edges {
            indegree[e.leader] += 1;
        }
        let mut queue: Vec<usize> = (0..n_agents).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for e in self.edges.iter().filter(|e| e.follower == i) {
                indegree[e.leader] -= 1;
                if indegree[e.leader] == 0 {
                    queue.push(e.leader);
                }
            }
        }
        seen != n_agents
    }

    /// Indices of the edges in force before or after the lane change.
    pub fn active_edges(&self, lane_change_done: bool) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| !(lane_change_done && self.edges[i].until_lane_change_done)).collect()
    }

    /// `Pd(i)` restricted to the given edges.
    pub fn preceding(&self, agent: usize, edges: &[usize]) -> Vec<usize> {
        edges.iter().map(|&e| &self.edges[e]).filter(|e| e.follower == agent).map(|e| e.leader).collect()
    }
}

/// Auxiliary copies `z` and duals `lambda` of every agent's path coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub z: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub rho: f64,
}

impl ConsensusState {
    pub fn new(z: Vec<Vec<f64>>, lambda: Vec<Vec<f64>>, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::invalid("admm.rho", "must be positive"));
        }
        if z.len() != lambda.len() || z.iter().zip(&lambda).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Dimension("z and lambda must have matching shapes".into()));
        }
        let n = z.first().map_or(0, Vec::len);
        if z.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("every agent needs the same horizon".into()));
        }
        Ok(Self { z, lambda, rho })
    }

    pub fn n_agents(&self) -> usize {
        self.z.len()
    }

    pub fn horizon(&self) -> usize {
        self.z.first().map_or(0, Vec::len)
    }
}

/// Solution of the coordination QP plus what is needed to warm-start the next
/// one.
#[derive(Debug, Clone)]
pub struct Coordination {
    pub z: Vec<Vec<f64>>,
    /// Slack variables, edge-major; see [`SlackMode::index`].
    pub slack: Vec<f64>,
    pub edges: Vec<usize>,
    pub kkt: KktResiduals,
    pub qp_iterations: usize,
    working_set: Vec<usize>,
}

impl Coordination {
    pub fn max_slack(&self) -> f64 {
        self.slack.iter().fold(0.0, |m, e| m.max(*e))
    }
}

fn build_qp(s_trajs: &[Vec<f64>], state: &ConsensusState, graph: &HeadwayGraph, edges: &[usize]) -> DiagonalQp {
    let na = state.n_agents();
    let n = state.horizon();
    let nz = na * n;
    let n_slack = graph.slack.count(edges.len(), n);
    let mut hessian_diag = vec![state.rho; nz];
    hessian_diag.extend(std::iter::repeat_n(0.0, n_slack));
    let mut linear = Vec::with_capacity(nz + n_slack);
    for i in 0..na {
        for j in 0..n {
            linear.push(-state.lambda[i][j] - state.rho * s_trajs[i][j]);
        }
    }
    linear.resize(nz + n_slack, 0.0);
    for (k, &e) in edges.iter().enumerate() {
        for j in 0..n {
            linear[nz + graph.slack.index(k, j, n)] = graph.edges[e].slack_weight;
        }
    }

    let mut rows = Vec::with_capacity(edges.len() * n + n_slack);
    let mut rhs = Vec::with_capacity(edges.len() * n + n_slack);
    // z_f - z_l - eps <= -d_hw
    for (k, &e) in edges.iter().enumerate() {
        let edge = &graph.edges[e];
        for j in 0..n {
            rows.push(vec![
                (edge.follower * n + j, 1.0),
                (edge.leader * n + j, -1.0),
                (nz + graph.slack.index(k, j, n), -1.0),
            ]);
            rhs.push(-graph.d_hw);
        }
    }
    // -eps <= 0
    for k in 0..n_slack {
        rows.push(vec![(nz + k, -1.0)]);
        rhs.push(0.0);
    }
    DiagonalQp { hessian_diag, linear, rows, rhs }
}

/// Feasible start at the unconstrained minimizer with each slack pinned by
/// its most violated row, or by its bound when nothing is violated.
fn cold_start(
    s_trajs: &[Vec<f64>],
    state: &ConsensusState,
    graph: &HeadwayGraph,
    edges: &[usize],
) -> (Vec<f64>, Vec<usize>) {
    let n = state.horizon();
    let n_slack = graph.slack.count(edges.len(), n);
    let mut x: Vec<f64> = s_trajs
        .iter()
        .zip(&state.lambda)
        .flat_map(|(s, l)| s.iter().zip(l).map(|(s, l)| s + l / state.rho))
        .collect();
    let nz = x.len();
    // (largest violation, its row) per slack variable
    let mut pin = vec![(0.0, usize::MAX); n_slack];
    for (k, &e) in edges.iter().enumerate() {
        let edge = &graph.edges[e];
        for j in 0..n {
            let violation = x[edge.follower * n + j] - x[edge.leader * n + j] + graph.d_hw;
            let slot = &mut pin[graph.slack.index(k, j, n)];
            if violation > slot.0 {
                *slot = (violation, k * n + j);
            }
        }
    }
    let mut working = Vec::with_capacity(n_slack);
    for (v, &(violation, row)) in pin.iter().enumerate() {
        if row == usize::MAX {
            x.push(0.0);
            working.push(edges.len() * n + v);
        } else {
            x.push(violation);
            working.push(row);
        }
    }
    debug_assert_eq!(x.len(), nz + n_slack);
    (x, working)
}

/// Warm-start data carried between coordination solves.
#[derive(Debug, Clone)]
pub struct CoordinatorWarmStart {
    x: Vec<f64>,
    working_set: Vec<usize>,
    edges: Vec<usize>,
}

impl From<&Coordination> for CoordinatorWarmStart {
    fn from(c: &Coordination) -> Self {
        let mut x: Vec<f64> = c.z.iter().flatten().copied().collect();
        x.extend_from_slice(&c.slack);
        Self { x, working_set: c.working_set.clone(), edges: c.edges.clone() }
    }
}

const QP_MAX_ITERS: usize = 500;

/// Minimizes `sum_i [-lambda_i' z_i + rho/2 |s_i - z_i|^2] + q' eps` subject to
/// `z_l - z_f >= d_hw - eps_e` on every stage of every edge and `eps >= 0`.
pub fn solve_coordination_qp(
    s_trajs: &[Vec<f64>],
    state: &ConsensusState,
    graph: &HeadwayGraph,
    edges: &[usize],
    warm: Option<&CoordinatorWarmStart>,
) -> Result<Coordination> {
    let na = state.n_agents();
    let n = state.horizon();
    if s_trajs.len() != na || s_trajs.iter().any(|s| s.len() != n) {
        return Err(Error::Dimension("path-coordinate messages do not match the consensus state".into()));
    }
    let qp = build_qp(s_trajs, state, graph, edges);

    let warm_solution = warm
        .filter(|w| w.edges == edges && w.x.len() == qp.dim())
        .and_then(|w| qp.solve(w.x.clone(), w.working_set.clone(), QP_MAX_ITERS).ok());
    let solution = match warm_solution {
        Some(sol) => sol,
        None => {
            let (x, working) = cold_start(s_trajs, state, graph, edges);
            qp.solve(x, working, QP_MAX_ITERS)?
        }
    };

    let kkt = qp.kkt_residuals(&solution.x, &solution.multipliers);
    let nz = na * n;
    let z = (0..na).map(|i| solution.x[i * n..(i + 1) * n].to_vec()).collect();
    let slack = solution.x[nz..].iter().map(|e| e.max(0.0)).collect();
    Ok(Coordination {
        z,
        slack,
        edges: edges.to_vec(),
        kkt,
        qp_iterations: solution.iterations,
        working_set: solution.working_set,
    })
}

/// `lambda_i <- lambda_i + rho (s_i - z_i)`.
pub fn dual_step(lambda: &mut [Vec<f64>], s_trajs: &[Vec<f64>], z: &[Vec<f64>], rho: f64) {
    for ((l, s), z) in lambda.iter_mut().zip(s_trajs).zip(z) {
        for ((l, s), z) in l.iter_mut().zip(s).zip(z) {
            *l += rho * (s - z);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

/// Primal `|s - z_new|` and dual `|rho (z_new - z_old)|`, stacked 2-norms.
pub fn compute_residuals(s_trajs: &[Vec<f64>], z_new: &[Vec<f64>], z_old: &[Vec<f64>], rho: f64) -> Residuals {
    let primal = s_trajs
        .iter()
        .flatten()
        .zip(z_new.iter().flatten())
        .map(|(s, z)| (s - z) * (s - z))
        .sum::<f64>()
        .sqrt();
    let dual = z_new
        .iter()
        .flatten()
        .zip(z_old.iter().flatten())
        .map(|(a, b)| rho * rho * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Residuals { primal, dual }
}

/// How the dual residual of the stopping test is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualResidual {
    /// `|rho (z_new - z_old)|`, the usual consensus-ADMM dual residual.
    #[default]
    ConsensusChange,
    /// `|rho (s - z_new)|`, i.e. the primal residual scaled by `rho`.
    ScaledGap,
}

/// [`compute_residuals`] with a selectable dual residual.
pub fn compute_residuals_with(
    kind: DualResidual,
    s_trajs: &[Vec<f64>],
    z_new: &[Vec<f64>],
    z_old: &[Vec<f64>],
    rho: f64,
) -> Residuals {
    let res = compute_residuals(s_trajs, z_new, z_old, rho);
    match kind {
        DualResidual::ConsensusChange => res,
        DualResidual::ScaledGap => Residuals { primal: res.primal, dual: rho * res.primal },
    }
}

pub fn check_stop(res: &Residuals, eps_primal: f64, eps_dual: f64) -> bool {
    res.primal <= eps_primal && res.dual <= eps_dual
}
