//! Monolithic solve of the coupled lane-change NLP, used as a reference for
//! the distributed scheme.
//!
//! All agents' decision vectors are stacked and the headway rows enter the
//! same augmented-Lagrangian machinery as the dynamics. Each edge keeps one
//! softening slack `eps_e >= 0` with linear cost `q_e eps_e`, as in the
//! coordination QP. The rows are turned into equalities with nonnegative
//! surplus variables `w`:
//!
//! ```text
//! s_f,j - s_l,j + d_hw - eps + w_e,j = 0,   w_e,j >= 0
//! ```
//!
//! Layout: `[xi_0, ..., xi_{A-1}, eps, w (E * N)]`.

use crate::coordinator::{HeadwayEdge, SlackMode};
use crate::error::{Error, Result};
use crate::ocp::{AgentProblem, DecisionTrajectory, STAGE_DIM};
use crate::solver::{alm_solve, AlmWarmStart, ConstrainedProblem, LocalSolution, SolveStatus, SolverSettings};

#[derive(Debug, Clone)]
pub struct CentralizedProblem<'a> {
    /// Per-agent problems; their consensus data is ignored.
    pub agents: Vec<AgentProblem<'a>>,
    pub edges: Vec<HeadwayEdge>,
    pub d_hw: f64,
    pub slack_mode: SlackMode,
}

#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub trajectories: Vec<DecisionTrajectory>,
    pub slack: Vec<f64>,
    /// Aggregate cost, see [`aggregate_cost`].
    pub cost: f64,
    pub solver: LocalSolution,
}

impl<'a> CentralizedProblem<'a> {
    pub fn new(mut agents: Vec<AgentProblem<'a>>, edges: Vec<HeadwayEdge>, d_hw: f64) -> Result<Self> {
        let n = agents.first().map_or(0, AgentProblem::horizon);
        if agents.is_empty() || agents.iter().any(|a| a.horizon() != n) {
            return Err(Error::Dimension("all agents need the same nonzero horizon".into()));
        }
        for a in &mut agents {
            a.admm = None;
            a.validate()?;
        }
        if edges.iter().any(|e| e.follower >= agents.len() || e.leader >= agents.len()) {
            return Err(Error::invalid("edges", "edge references an unknown agent"));
        }
        Ok(Self { agents, edges, d_hw, slack_mode: SlackMode::PerEdge })
    }

    pub fn with_slack(mut self, slack_mode: SlackMode) -> Self {
        self.slack_mode = slack_mode;
        self
    }

    fn n_slack(&self) -> usize {
        self.slack_mode.count(self.edges.len(), self.horizon())
    }

    fn eps_index(&self, k: usize, stage: usize) -> usize {
        self.slack_offset() + self.slack_mode.index(k, stage, self.horizon())
    }

    pub fn horizon(&self) -> usize {
        self.agents[0].horizon()
    }

    fn agent_dim(&self) -> usize {
        self.horizon() * STAGE_DIM
    }

    fn slack_offset(&self) -> usize {
        self.agents.len() * self.agent_dim()
    }

    fn surplus_offset(&self) -> usize {
        self.slack_offset() + self.n_slack()
    }

    fn agent_n_eq(&self) -> usize {
        self.agents.iter().map(AgentProblem::n_eq).sum()
    }

    fn s(&self, x: &[f64], agent: usize, stage: usize) -> f64 {
        x[agent * self.agent_dim() + stage * STAGE_DIM]
    }

    /// Headway rows `s_f - s_l + d_hw - eps + w`, edge-major.
    fn headway_rows(&self, x: &[f64]) -> Vec<f64> {
        let n = self.horizon();
        let mut rows = Vec::with_capacity(self.edges.len() * n);
        for (k, e) in self.edges.iter().enumerate() {
            for j in 0..n {
                let eps = x[self.eps_index(k, j)];
                let w = x[self.surplus_offset() + k * n + j];
                rows.push(self.s(x, e.follower, j) - self.s(x, e.leader, j) + self.d_hw - eps + w);
            }
        }
        rows
    }

    /// Stacks per-agent trajectories and fills slack and surplus variables
    /// consistently.
    pub fn initial_point(&self, trajectories: &[DecisionTrajectory]) -> Result<Vec<f64>> {
        if trajectories.len() != self.agents.len() || trajectories.iter().any(|t| t.horizon() != self.horizon()) {
            return Err(Error::Dimension("one trajectory per agent with the common horizon expected".into()));
        }
        let n = self.horizon();
        let mut x: Vec<f64> = trajectories.iter().flat_map(|t| t.as_slice().iter().copied()).collect();
        let mut eps = vec![0.0f64; self.n_slack()];
        let mut gaps = Vec::with_capacity(self.edges.len() * n);
        for (k, e) in self.edges.iter().enumerate() {
            for j in 0..n {
                let gap = self.s(&x, e.follower, j) - self.s(&x, e.leader, j) + self.d_hw;
                let slot = &mut eps[self.slack_mode.index(k, j, n)];
                *slot = slot.max(gap);
                gaps.push(gap);
            }
        }
        let surplus: Vec<f64> =
            gaps.iter().enumerate().map(|(r, g)| eps[self.slack_mode.index(r / n, r % n, n)] - g).collect();
        x.extend_from_slice(&eps);
        x.extend(surplus);
        Ok(x)
    }

    fn split(&self, x: &[f64]) -> Vec<DecisionTrajectory> {
        x[..self.slack_offset()]
            .chunks_exact(self.agent_dim())
            .map(|c| DecisionTrajectory::from_vec(c.to_vec()).expect("agent slice has stage layout"))
            .collect()
    }
}

impl ConstrainedProblem for CentralizedProblem<'_> {
    fn dim(&self) -> usize {
        self.surplus_offset() + self.edges.len() * self.horizon()
    }

    /// Dynamics of every agent followed by the headway rows.
    fn n_eq(&self) -> usize {
        self.agent_n_eq() + self.edges.len() * self.horizon()
    }

    fn n_ineq(&self) -> usize {
        self.agents.iter().map(AgentProblem::n_ineq).sum()
    }

    fn project(&self, x: &mut [f64]) {
        let d = self.agent_dim();
        for (a, chunk) in self.agents.iter().zip(x[..self.slack_offset()].chunks_exact_mut(d)) {
            a.project_box(chunk);
        }
        for v in &mut x[self.slack_offset()..] {
            *v = v.max(0.0);
        }
    }

    fn penalized(&self, x: &[f64], multipliers: &[f64], alpha: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
        let d = self.agent_dim();
        let n_eq = self.n_eq();
        let mut value = 0.0;
        let (mut eq_off, mut ineq_off) = (0, n_eq);
        let mut local = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            let (m, q) = (a.n_eq(), a.n_ineq());
            local.clear();
            local.extend_from_slice(&multipliers[eq_off..eq_off + m]);
            local.extend_from_slice(&multipliers[ineq_off..ineq_off + q]);
            let xi = &x[i * d..(i + 1) * d];
            value += a.evaluate_augmented(xi, &local, alpha, grad.as_deref_mut().map(|g| &mut g[i * d..(i + 1) * d]))?;
            eq_off += m;
            ineq_off += q;
        }
        if let Some(g) = grad.as_deref_mut() {
            g[self.slack_offset()..].fill(0.0);
        }

        let n = self.horizon();
        let rows = self.headway_rows(x);
        for (k, e) in self.edges.iter().enumerate() {
            for j in 0..n {
                if self.slack_mode == SlackMode::PerStage || j == 0 {
                    value += e.slack_weight * x[self.eps_index(k, j)];
                    if let Some(g) = grad.as_deref_mut() {
                        g[self.eps_index(k, j)] += e.slack_weight;
                    }
                }
                let r = rows[k * n + j];
                let y = multipliers[eq_off + k * n + j];
                value += y * r + 0.5 * alpha * r * r;
                if let Some(g) = grad.as_deref_mut() {
                    let c = y + alpha * r;
                    g[e.follower * d + j * STAGE_DIM] += c;
                    g[e.leader * d + j * STAGE_DIM] -= c;
                    g[self.eps_index(k, j)] -= c;
                    g[self.surplus_offset() + k * n + j] += c;
                }
            }
        }
        Ok(value)
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) -> Result<f64> {
        let d = self.agent_dim();
        let n_eq = self.n_eq();
        let (mut eq_off, mut ineq_off) = (0, n_eq);
        let mut worst = 0.0f64;
        let mut local = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            let (m, q) = (a.n_eq(), a.n_ineq());
            local.resize(m + q, 0.0);
            worst = worst.max(a.constraints(&x[i * d..(i + 1) * d], &mut local)?);
            c[eq_off..eq_off + m].copy_from_slice(&local[..m]);
            c[ineq_off..ineq_off + q].copy_from_slice(&local[m..]);
            eq_off += m;
            ineq_off += q;
        }
        c[eq_off..n_eq].copy_from_slice(&self.headway_rows(x));
        Ok(worst)
    }
}

/// Tracking costs plus the cheapest slack cost that makes every headway row
/// hold for the given trajectories: `q_e max_j [s_f,j - s_l,j + d_hw]_+` per
/// edge, or the sum over stages with per-stage slacks.
pub fn aggregate_cost(
    agents: &[AgentProblem<'_>],
    trajectories: &[DecisionTrajectory],
    edges: &[HeadwayEdge],
    d_hw: f64,
    slack_mode: SlackMode,
) -> f64 {
    let tracking: f64 = agents.iter().zip(trajectories).map(|(a, t)| a.tracking_cost(t.as_slice())).sum();
    let slack: f64 = edges
        .iter()
        .map(|e| {
            let sf = trajectories[e.follower].path_coordinates();
            let sl = trajectories[e.leader].path_coordinates();
            let violations = sf.iter().zip(&sl).map(|(f, l)| (f - l + d_hw).max(0.0));
            let total = match slack_mode {
                SlackMode::PerEdge => violations.fold(0.0, f64::max),
                SlackMode::PerStage => violations.sum(),
            };
            e.slack_weight * total
        })
        .sum();
    tracking + slack
}

/// Solves the stacked problem from per-agent initial trajectories.
pub fn solve_centralized(
    problem: &CentralizedProblem<'_>,
    warm: &[DecisionTrajectory],
    multipliers: Option<&AlmWarmStart>,
    settings: &SolverSettings,
) -> Result<CentralizedSolution> {
    let x0 = problem.initial_point(warm)?;
    let solver = alm_solve(problem, &x0, multipliers, settings);
    if solver.status == SolveStatus::DomainError {
        return Err(Error::domain("centralized solve left the model domain"));
    }
    let trajectories = problem.split(&solver.x);
    let slack = solver.x[problem.slack_offset()..problem.surplus_offset()].to_vec();
    let cost = aggregate_cost(&problem.agents, &trajectories, &problem.edges, problem.d_hw, problem.slack_mode);
    Ok(CentralizedSolution { trajectories, slack, cost, solver })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AgentState, ControlInput, VehicleGeometry};
    use crate::ocp::{CostWeights, StageBounds, StageReference};
    use crate::road::RoadProfile;

    fn bounds(lo: f64, hi: f64) -> StageBounds {
        StageBounds {
            dy_lo: lo,
            dy_hi: hi,
            v_hi: 17.0,
            ax_lo: -4.0,
            ax_hi: 4.0,
            delta_lo: -5f64.to_radians(),
            delta_hi: 5f64.to_radians(),
            ay_hi: 3.5,
            atot_hi: 4.0,
        }
    }

    fn agent(road: &RoadProfile, s0: f64, dy: f64, n: usize) -> AgentProblem<'_> {
        AgentProblem {
            x0: AgentState::new(s0, dy, 0.0, 14.0),
            road,
            geom: VehicleGeometry::default(),
            ts: 0.1,
            weights: CostWeights::default(),
            bounds: vec![bounds(dy - 0.75, dy + 0.75); n],
            refs: (0..=n).map(|j| StageReference { s: s0 + 1.4 * j as f64, dy, dpsi: 0.0, v: 14.0 }).collect(),
            admm: None,
        }
    }

    fn cruise(p: &AgentProblem<'_>) -> DecisionTrajectory {
        let u = vec![ControlInput::new(0.0, 0.0); p.horizon()];
        DecisionTrajectory::rollout(&p.x0, &u, p.ts, p.road, &p.geom).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for mode in [SlackMode::PerEdge, SlackMode::PerStage] {
            check_gradient(mode);
        }
    }

    fn check_gradient(mode: SlackMode) {
        let road = RoadProfile::constant(-100.0, 500.0, 0.005, 4.0).unwrap();
        let agents = vec![agent(&road, 10.0, 2.0, 4), agent(&road, 0.0, 2.0, 4)];
        let edge = HeadwayEdge { follower: 1, leader: 0, slack_weight: 1e3, until_lane_change_done: false };
        let p = CentralizedProblem::new(agents, vec![edge], 15.0).unwrap().with_slack(mode);
        let warm: Vec<_> = p.agents.iter().map(cruise).collect();
        let mut x = p.initial_point(&warm).unwrap();
        for (i, v) in x.iter_mut().enumerate() {
            *v += 1e-3 * ((i * 7 % 11) as f64 - 5.5);
        }
        let mu: Vec<f64> = (0..p.n_eq() + p.n_ineq()).map(|i| (i % 5) as f64 * 0.5).collect();
        let mut g = vec![0.0; x.len()];
        p.penalized(&x, &mu, 50.0, Some(&mut g)).unwrap();
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.penalized(&xp, &mu, 50.0, None).unwrap() - p.penalized(&xm, &mu, 50.0, None).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{mode:?} component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn opens_a_short_gap() {
        let road = RoadProfile::straight(-100.0, 500.0, 4.0).unwrap();
        let agents = vec![agent(&road, 10.0, 2.0, 10), agent(&road, 0.0, 2.0, 10)];
        let edge = HeadwayEdge { follower: 1, leader: 0, slack_weight: 1e3, until_lane_change_done: false };
        let p = CentralizedProblem::new(agents, vec![edge], 15.0).unwrap();
        let warm: Vec<_> = p.agents.iter().map(cruise).collect();
        let sol = solve_centralized(&p, &warm, None, &SolverSettings::default()).unwrap();
        assert_eq!(sol.solver.status, SolveStatus::Converged);
        // leader speeds up, follower brakes
        assert!(sol.trajectories[0].input(0).ax > 0.5);
        assert!(sol.trajectories[1].input(0).ax < -0.5);
        // the gap grows but cannot reach 15 m within one second
        let s0 = sol.trajectories[0].path_coordinates();
        let s1 = sol.trajectories[1].path_coordinates();
        assert!(s0[9] - s1[9] > 10.0);
        assert!(sol.slack[0] > 0.0);
    }

    #[test]
    fn initial_point_satisfies_headway_rows() {
        let road = RoadProfile::straight(-100.0, 500.0, 4.0).unwrap();
        let agents = vec![agent(&road, 10.0, 2.0, 5), agent(&road, 0.0, 2.0, 5)];
        let edge = HeadwayEdge { follower: 1, leader: 0, slack_weight: 10.0, until_lane_change_done: false };
        let p = CentralizedProblem::new(agents, vec![edge], 15.0).unwrap().with_slack(SlackMode::PerStage);
        let warm: Vec<_> = p.agents.iter().map(cruise).collect();
        let x = p.initial_point(&warm).unwrap();
        assert!(p.headway_rows(&x).iter().all(|r| r.abs() < 1e-12));
        // equal speeds keep the 10 m gap, so every stage needs 5 m of slack
        let eps = &x[p.slack_offset()..p.slack_offset() + 5];
        assert!(eps.iter().all(|e| (e - 5.0).abs() < 1e-9));
        let cost = aggregate_cost(&p.agents, &warm, &p.edges, p.d_hw, SlackMode::PerStage);
        let tracking: f64 = p.agents.iter().zip(&warm).map(|(a, t)| a.tracking_cost(t.as_slice())).sum();
        assert!((cost - tracking - 10.0 * 25.0).abs() < 1e-6);
    }
}
