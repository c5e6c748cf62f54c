//! Closed-loop receding-horizon simulation: the maneuver state machine, one
//! consensus-ADMM solve per sampling instant, and the plant update.

use serde::{Deserialize, Serialize};

use crate::centralized::{solve_centralized, CentralizedProblem};
use crate::coordinator::{
    check_stop, compute_residuals_with, dual_step, solve_coordination_qp, ConsensusState, CoordinatorWarmStart,
    HeadwayGraph, Residuals,
};
use crate::dynamics::{lateral_accel, rk4_step, AgentState, ControlInput, NX};
use crate::error::{Error, Result};
use crate::ocp::{AdmmLocalData, AgentProblem, DecisionTrajectory, StageReference, INEQ_PER_STAGE};
use crate::road::RoadProfile;
use crate::scenario::ScenarioConfig;
use crate::solver::{alm_solve, AlmWarmStart, LocalSolution, SolveStatus, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverPhase {
    /// Agents open the gap for the subject agent.
    EstablishHeadway,
    /// The subject agent changes lanes.
    LaneChange,
    Done,
}

impl ManeuverPhase {
    pub fn label(self) -> &'static str {
        match self {
            ManeuverPhase::EstablishHeadway => "step1",
            ManeuverPhase::LaneChange => "step2",
            ManeuverPhase::Done => "done",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "step1" => Some(ManeuverPhase::EstablishHeadway),
            "step2" => Some(ManeuverPhase::LaneChange),
            "done" => Some(ManeuverPhase::Done),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub latency_per_message_s: f64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        Self { latency_per_message_s: 0.003 }
    }
}

/// Two messages per ADMM iteration: agents to coordinator and back.
pub fn account_comm_overhead(admm_iters: usize, network: &NetworkModel) -> f64 {
    admm_iters as f64 * 2.0 * network.latency_per_message_s
}

/// True when every active edge touching `subject` holds with at least
/// `d_hw - tol` now and at every predicted stage.
pub fn check_headway_established(
    s_trajs: &[Vec<f64>],
    s_now: &[f64],
    graph: &HeadwayGraph,
    edges: &[usize],
    subject: usize,
    tol: f64,
) -> bool {
    let need = graph.d_hw - tol;
    edges.iter().map(|&e| &graph.edges[e]).filter(|e| e.follower == subject || e.leader == subject).all(|e| {
        s_now[e.leader] - s_now[e.follower] >= need
            && s_trajs[e.leader].iter().zip(&s_trajs[e.follower]).all(|(l, f)| l - f >= need)
    })
}

/// Lateral band and lateral reference of one agent in a given phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSetup {
    pub band: [f64; 2],
    pub dy_ref: f64,
}

/// Bands and references of all agents for `phase`. Only the subject agent
/// changes: its own lane in the first step, both lanes with the target-lane
/// reference while changing lanes, and the target lane afterwards.
pub fn apply_phase_switch(config: &ScenarioConfig, road: &RoadProfile, phase: ManeuverPhase) -> Vec<AgentSetup> {
    let subject = config.subject_index();
    let target = config.maneuver.target_lane;
    config
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let own = AgentSetup { band: config.road.lane_band(a.lane), dy_ref: road.lane_center(a.lane) };
            if Some(i) != subject {
                return own;
            }
            match phase {
                ManeuverPhase::EstablishHeadway => own,
                ManeuverPhase::LaneChange => AgentSetup { band: config.road.both_band(), dy_ref: road.lane_center(target) },
                ManeuverPhase::Done => {
                    AgentSetup { band: config.road.lane_band(target), dy_ref: road.lane_center(target) }
                }
            }
        })
        .collect()
}

/// Declares the lane change complete after `samples` consecutive samples
/// close to the target lane center with small heading error.
#[derive(Debug, Clone)]
pub struct CompletionDetector {
    target_dy: f64,
    dy_tol: f64,
    dpsi_tol: f64,
    samples: usize,
    count: usize,
}

impl CompletionDetector {
    pub fn new(target_dy: f64, dy_tol: f64, dpsi_tol: f64, samples: usize) -> Self {
        Self { target_dy, dy_tol, dpsi_tol, samples, count: 0 }
    }

    pub fn observe(&mut self, x: &AgentState) -> bool {
        if (x.dy - self.target_dy).abs() <= self.dy_tol && x.dpsi.abs() <= self.dpsi_tol {
            self.count += 1;
        } else {
            self.count = 0;
        }
        self.count >= self.samples
    }
}

/// Builds every agent's local problem at the current sampling instant.
pub fn build_agent_problems<'a>(
    config: &ScenarioConfig,
    road: &'a RoadProfile,
    states: &[AgentState],
    setups: &[AgentSetup],
) -> Vec<AgentProblem<'a>> {
    let n = config.horizon.n_stages;
    let ts = config.horizon.sample_time_s;
    config
        .agents
        .iter()
        .zip(states)
        .zip(setups)
        .map(|((a, x0), setup)| AgentProblem {
            x0: *x0,
            road,
            geom: a.geometry,
            ts,
            weights: a.weights,
            bounds: vec![a.stage_bounds(setup.band); n],
            refs: (0..=n)
                .map(|j| StageReference {
                    s: x0.s + a.v_ref_mps * ts * j as f64,
                    dy: setup.dy_ref,
                    dpsi: 0.0,
                    v: a.v_ref_mps,
                })
                .collect(),
            admm: None,
        })
        .collect()
}

/// Constant-speed, zero-steering rollout from `x0`.
pub fn cruise_rollout(problem: &AgentProblem<'_>) -> Result<DecisionTrajectory> {
    let u = vec![ControlInput::new(0.0, 0.0); problem.horizon()];
    DecisionTrajectory::rollout(&problem.x0, &u, problem.ts, problem.road, &problem.geom)
}

/// Initial guess carried from one sampling instant to the next.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub xi: Vec<DecisionTrajectory>,
    pub z: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub multipliers: Vec<Vec<f64>>,
}

impl WarmStart {
    /// Cruise rollouts with `z = C xi` and zero duals.
    pub fn cold(problems: &[AgentProblem<'_>]) -> Result<Self> {
        let xi = problems.iter().map(cruise_rollout).collect::<Result<Vec<_>>>()?;
        let z = xi.iter().map(DecisionTrajectory::path_coordinates).collect();
        let n = problems.first().map_or(0, AgentProblem::horizon);
        Ok(Self {
            xi,
            z,
            lambda: vec![vec![0.0; n]; problems.len()],
            multipliers: problems.iter().map(|p| vec![0.0; p.n_eq() + p.n_ineq()]).collect(),
        })
    }

    /// Shift everything by one stage. Trajectories are extended by one more
    /// model step, `z` by that step's path coordinate, and the duals by
    /// repeating their last entry.
    pub fn shifted(&self, problems: &[AgentProblem<'_>]) -> Result<Self> {
        let xi = self
            .xi
            .iter()
            .zip(problems)
            .map(|(t, p)| t.shifted(p.ts, p.road, &p.geom))
            .collect::<Result<Vec<_>>>()?;
        let z = self
            .z
            .iter()
            .zip(&xi)
            .map(|(z, t)| {
                let mut next = z[1..].to_vec();
                next.push(*t.path_coordinates().last().expect("nonempty horizon"));
                next
            })
            .collect();
        let shift = |v: &Vec<f64>, block: usize| {
            let mut next = v[block..].to_vec();
            next.extend_from_slice(&v[v.len() - block..]);
            next
        };
        Ok(Self {
            xi,
            z,
            lambda: self.lambda.iter().map(|l| shift(l, 1)).collect(),
            multipliers: self
                .multipliers
                .iter()
                .zip(problems)
                .map(|(m, p)| {
                    // equality block by one state, inequality block by one stage
                    let (eq, ineq) = m.split_at(p.n_eq().min(m.len()));
                    let mut next = shift(&eq.to_vec(), NX);
                    if !ineq.is_empty() {
                        next.extend(shift(&ineq.to_vec(), INEQ_PER_STAGE));
                    }
                    next
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Distributed,
    Centralized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub mode: Mode,
    /// Solve agents concurrently (only with the `parallel` feature).
    pub parallel: bool,
    /// Stop earlier than the scenario's end time.
    pub max_time_s: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { mode: Mode::Distributed, parallel: true, max_time_s: None }
    }
}

/// What one agent did at one sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    /// Measured state at the start of the step.
    pub state: AgentState,
    pub input: ControlInput,
    pub lateral_accel: f64,
    pub band: [f64; 2],
    /// Wall time of all local solves in this step; the subject agent also
    /// carries the coordinator's time.
    pub solve_time_s: f64,
    pub inner_iters: usize,
    pub status: SolveStatus,
    /// Predicted path coordinates after the final ADMM iteration.
    pub predicted_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestepTrace {
    pub step: usize,
    pub time_s: f64,
    pub phase: ManeuverPhase,
    pub agents: Vec<AgentStep>,
    pub admm_iters: usize,
    pub residuals: Vec<Residuals>,
    /// Whether the ADMM stopping test passed before the iteration cap.
    pub converged: bool,
    pub comm_overhead_s: f64,
    /// Slack of every active edge, indexed like `active_edges`.
    pub slack: Vec<f64>,
    pub active_edges: Vec<usize>,
    pub qp_kkt: f64,
}

impl TimestepTrace {
    pub fn max_slack(&self) -> f64 {
        self.slack.iter().fold(0.0, |m, e| m.max(*e))
    }

    /// Local solves that hit an iteration cap, or an ADMM loop that did.
    pub fn has_nonconvergence(&self) -> bool {
        !self.converged || self.agents.iter().any(|a| a.status != SolveStatus::Converged)
    }
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }

    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

// no monotonic clock without host bindings
#[cfg(target_arch = "wasm32")]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Clock
    }

    fn elapsed(&self) -> f64 {
        0.0
    }
}

fn solve_one(
    problem: &AgentProblem<'_>,
    xi: &[f64],
    warm: &AlmWarmStart,
    settings: &SolverSettings,
) -> (LocalSolution, f64) {
    let clock = Clock::start();
    let sol = alm_solve(problem, xi, Some(warm), settings);
    (sol, clock.elapsed())
}

fn solve_all(
    problems: &[AgentProblem<'_>],
    xi: &[Vec<f64>],
    warm: &[AlmWarmStart],
    settings: &SolverSettings,
    parallel: bool,
) -> Vec<(LocalSolution, f64)> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return problems
            .par_iter()
            .zip(xi.par_iter())
            .zip(warm.par_iter())
            .map(|((p, x), w)| solve_one(p, x, w, settings))
            .collect();
    }
    let _ = parallel;
    problems.iter().zip(xi).zip(warm).map(|((p, x), w)| solve_one(p, x, w, settings)).collect()
}

/// Result of one distributed solve at a single sampling instant.
#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub solutions: Vec<LocalSolution>,
    pub solve_times_s: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub slack: Vec<f64>,
    pub residuals: Vec<Residuals>,
    pub converged: bool,
    pub qp_kkt: f64,
}

impl AdmmOutcome {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    pub fn trajectories(&self) -> Vec<DecisionTrajectory> {
        self.solutions
            .iter()
            .map(|s| DecisionTrajectory::from_vec(s.x.clone()).expect("solver keeps the stage layout"))
            .collect()
    }
}

/// Runs consensus ADMM at one sampling instant.
///
/// Each iteration solves all local problems against the current `(z, lambda)`,
/// solves the coordination QP on the returned path coordinates, takes the
/// dual step and tests the residuals. The coordinator's time is booked on
/// `coordinator_agent`.
#[allow(clippy::too_many_arguments)]
pub fn run_admm(
    problems: &mut [AgentProblem<'_>],
    warm: &WarmStart,
    graph: &HeadwayGraph,
    edges: &[usize],
    config: &ScenarioConfig,
    coordinator_agent: usize,
    parallel: bool,
) -> Result<AdmmOutcome> {
    let rho = config.admm.rho;
    let settings = &config.solver;
    let mut xi: Vec<Vec<f64>> = warm.xi.iter().map(|t| t.as_slice().to_vec()).collect();
    let mut alm: Vec<AlmWarmStart> = warm
        .multipliers
        .iter()
        .map(|m| AlmWarmStart { multipliers: m.clone(), penalty: settings.initial_penalty })
        .collect();
    let mut z = warm.z.clone();
    let mut lambda = warm.lambda.clone();
    let mut coord_warm: Option<CoordinatorWarmStart> = None;
    let mut times = vec![0.0; problems.len()];
    let mut residuals = Vec::new();
    let mut solutions = Vec::new();
    let mut slack = vec![0.0; graph.slack.count(edges.len(), z.first().map_or(0, Vec::len))];
    let mut qp_kkt = 0.0;
    let mut converged = false;

    for _ in 0..config.admm.max_iters {
        for (i, p) in problems.iter_mut().enumerate() {
            p.admm = Some(AdmmLocalData { z: z[i].clone(), lambda: lambda[i].clone(), rho });
        }
        let results = solve_all(problems, &xi, &alm, settings, parallel);
        solutions.clear();
        for (i, (sol, t)) in results.into_iter().enumerate() {
            if sol.status == SolveStatus::DomainError {
                return Err(Error::domain(format!("local solve of agent {} left the model domain", config.agents[i].name)));
            }
            times[i] += t;
            xi[i].clone_from(&sol.x);
            // only the multipliers carry over; a large inherited penalty
            // conditions the next solve badly once (z, lambda) move
            alm[i].multipliers.clone_from(&sol.multipliers);
            solutions.push(sol);
        }
        let s_trajs: Vec<Vec<f64>> =
            xi.iter().map(|x| x.iter().step_by(crate::ocp::STAGE_DIM).copied().collect()).collect();

        let clock = Clock::start();
        let state = ConsensusState { z: z.clone(), lambda: lambda.clone(), rho };
        let coord = solve_coordination_qp(&s_trajs, &state, graph, edges, coord_warm.as_ref())?;
        dual_step(&mut lambda, &s_trajs, &coord.z, rho);
        let res = compute_residuals_with(config.admm.dual_residual, &s_trajs, &coord.z, &z, rho);
        times[coordinator_agent] += clock.elapsed();

        residuals.push(res);
        slack.clone_from(&coord.slack);
        qp_kkt = coord.kkt.max();
        coord_warm = Some(CoordinatorWarmStart::from(&coord));
        z = coord.z;
        if check_stop(&res, config.admm.eps_primal_m, config.admm.eps_dual) {
            converged = true;
            break;
        }
    }

    Ok(AdmmOutcome { solutions, solve_times_s: times, z, lambda, slack, residuals, converged, qp_kkt })
}

/// Closed-loop simulation state.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    road: RoadProfile,
    graph: HeadwayGraph,
    options: SimOptions,
    states: Vec<AgentState>,
    phase: ManeuverPhase,
    detector: Option<CompletionDetector>,
    warm: Option<WarmStart>,
    step: usize,
}

impl Simulation {
    pub fn new(config: ScenarioConfig, options: SimOptions) -> Result<Self> {
        config.validate()?;
        let road = config.road.profile()?;
        let graph = config.headway_graph()?;
        let states = config.agents.iter().map(|a| AgentState::from(a.initial)).collect();
        let detector = config.subject_index().map(|_| {
            let m = &config.maneuver;
            CompletionDetector::new(
                road.lane_center(m.target_lane),
                m.completion_dy_tol_m,
                m.completion_dpsi_tol_rad,
                m.completion_samples,
            )
        });
        Ok(Self {
            config,
            road,
            graph,
            options,
            states,
            phase: ManeuverPhase::EstablishHeadway,
            detector,
            warm: None,
            step: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn phase(&self) -> ManeuverPhase {
        self.phase
    }

    pub fn time_s(&self) -> f64 {
        self.step as f64 * self.config.horizon.sample_time_s
    }

    /// Number of steps needed to reach the end time (or `max_time_s`).
    pub fn n_steps(&self) -> usize {
        let end = self.options.max_time_s.map_or(self.config.simulation.end_time_s, |t| {
            t.min(self.config.simulation.end_time_s)
        });
        (end / self.config.horizon.sample_time_s - 1e-9).ceil().max(0.0) as usize
    }

    /// Phase transitions are evaluated on the measured states and the
    /// predictions carried in the warm start, before the step's problems are
    /// built.
    fn update_phase(&mut self) {
        let Some(subject) = self.config.subject_index() else {
            return;
        };
        match self.phase {
            ManeuverPhase::EstablishHeadway => {
                let Some(warm) = &self.warm else {
                    return;
                };
                let s_trajs: Vec<Vec<f64>> = warm.xi.iter().map(DecisionTrajectory::path_coordinates).collect();
                let s_now: Vec<f64> = self.states.iter().map(|x| x.s).collect();
                let edges = self.graph.active_edges(false);
                if check_headway_established(
                    &s_trajs,
                    &s_now,
                    &self.graph,
                    &edges,
                    subject,
                    self.config.maneuver.headway_check_tol_m,
                ) {
                    self.phase = ManeuverPhase::LaneChange;
                }
            }
            ManeuverPhase::LaneChange => {
                let detector = self.detector.as_mut().expect("subject agent has a detector");
                if detector.observe(&self.states[subject]) {
                    self.phase = ManeuverPhase::Done;
                }
            }
            ManeuverPhase::Done => {}
        }
    }

    pub fn step(&mut self) -> Result<TimestepTrace> {
        self.update_phase();
        let setups = apply_phase_switch(&self.config, &self.road, self.phase);
        let mut problems = build_agent_problems(&self.config, &self.road, &self.states, &setups);
        let warm = match &self.warm {
            Some(w) => w.clone(),
            None => WarmStart::cold(&problems)?,
        };
        let edges = self.graph.active_edges(self.phase == ManeuverPhase::Done);
        let coordinator = self.config.subject_index().unwrap_or(0);

        let (trajectories, times, iters, residuals, converged, slack, qp_kkt, statuses, inner, next_partial) =
            match self.options.mode {
                Mode::Distributed => {
                    let out = run_admm(
                        &mut problems,
                        &warm,
                        &self.graph,
                        &edges,
                        &self.config,
                        coordinator,
                        self.options.parallel,
                    )?;
                    let trajectories = out.trajectories();
                    let next = WarmStart {
                        xi: trajectories.clone(),
                        z: out.z.clone(),
                        lambda: out.lambda.clone(),
                        multipliers: out.solutions.iter().map(|s| s.multipliers.clone()).collect(),
                    };
                    (
                        trajectories,
                        out.solve_times_s.clone(),
                        out.iterations(),
                        out.residuals.clone(),
                        out.converged,
                        out.slack.clone(),
                        out.qp_kkt,
                        out.solutions.iter().map(|s| s.status).collect::<Vec<_>>(),
                        out.solutions.iter().map(|s| s.inner_iters).collect::<Vec<_>>(),
                        next,
                    )
                }
                Mode::Centralized => {
                    let edge_list: Vec<_> = edges.iter().map(|&e| self.graph.edges[e].clone()).collect();
                    let central = CentralizedProblem::new(problems.clone(), edge_list, self.graph.d_hw)?.with_slack(self.graph.slack);
                    let clock = Clock::start();
                    let sol = solve_centralized(&central, &warm.xi, None, &self.config.solver)?;
                    let mut times = vec![0.0; problems.len()];
                    times[coordinator] = clock.elapsed();
                    let status = sol.solver.status;
                    let z = sol.trajectories.iter().map(DecisionTrajectory::path_coordinates).collect();
                    let next = WarmStart { xi: sol.trajectories.clone(), z, ..warm.clone() };
                    (
                        sol.trajectories,
                        times,
                        0,
                        Vec::new(),
                        status == SolveStatus::Converged,
                        sol.slack,
                        0.0,
                        vec![status; problems.len()],
                        vec![sol.solver.inner_iters; problems.len()],
                        next,
                    )
                }
            };

        let mut agents = Vec::with_capacity(problems.len());
        let mut next_states = Vec::with_capacity(problems.len());
        for (i, p) in problems.iter().enumerate() {
            let u = trajectories[i].input(0);
            let x = self.states[i];
            agents.push(AgentStep {
                state: x,
                input: u,
                lateral_accel: lateral_accel(&x, &u, &p.geom)?,
                band: setups[i].band,
                solve_time_s: times[i],
                inner_iters: inner[i],
                status: statuses[i],
                predicted_s: trajectories[i].path_coordinates(),
            });
            next_states.push(rk4_step(&x, &u, p.ts, &self.road, &p.geom)?);
        }

        let trace = TimestepTrace {
            step: self.step,
            time_s: self.time_s(),
            phase: self.phase,
            agents,
            admm_iters: iters,
            residuals,
            converged,
            comm_overhead_s: account_comm_overhead(iters, &self.config.network),
            slack,
            active_edges: edges,
            qp_kkt,
        };

        self.states = next_states;
        self.step += 1;
        let shifted_problems = build_agent_problems(&self.config, &self.road, &self.states, &setups);
        self.warm = Some(next_partial.shifted(&shifted_problems)?);
        Ok(trace)
    }

    pub fn run(&mut self) -> Result<Vec<TimestepTrace>> {
        let n = self.n_steps();
        let mut traces = Vec::with_capacity(n);
        while self.step < n {
            traces.push(self.step()?);
        }
        Ok(traces)
    }
}

pub fn simulate(config: &ScenarioConfig, options: SimOptions) -> Result<Vec<TimestepTrace>> {
    Simulation::new(config.clone(), options)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinator::HeadwayEdge;

    #[test]
    fn comm_overhead_examples() {
        let net = NetworkModel { latency_per_message_s: 0.003 };
        assert!((account_comm_overhead(1, &net) - 0.006).abs() < 1e-15);
        assert!((account_comm_overhead(9, &net) - 0.054).abs() < 1e-15);
        assert_eq!(account_comm_overhead(5, &NetworkModel { latency_per_message_s: 0.0 }), 0.0);
    }

    fn graph() -> HeadwayGraph {
        let e = |follower, leader| HeadwayEdge { follower, leader, slack_weight: 1e3, until_lane_change_done: false };
        HeadwayGraph::new(vec![e(1, 0), e(2, 1), e(2, 0)], 15.0, 3).unwrap()
    }

    #[test]
    fn headway_check_examples() {
        let g = graph();
        let edges = g.active_edges(false);
        let s_now = [12.0, 6.0, 0.0];
        let traj = |s: f64| vec![s; 15];
        assert!(!check_headway_established(&[traj(12.0), traj(6.0), traj(0.0)], &s_now, &g, &edges, 1, 0.0));

        let s_now = [30.0, 15.0, 0.0];
        let exact = [traj(30.0), traj(15.0), traj(0.0)];
        assert!(check_headway_established(&exact, &s_now, &g, &edges, 1, 0.0));

        let mut late = exact.clone();
        late[1][14] = 15.1;
        assert!(!check_headway_established(&late, &s_now, &g, &edges, 1, 0.0));
    }

    #[test]
    fn phase_switch_only_touches_the_subject() {
        let config = ScenarioConfig::paper_3agent();
        let road = config.road.profile().unwrap();
        let step1 = apply_phase_switch(&config, &road, ManeuverPhase::EstablishHeadway);
        assert_eq!(step1[1], AgentSetup { band: [-2.75, -1.25], dy_ref: -2.0 });
        let step2 = apply_phase_switch(&config, &road, ManeuverPhase::LaneChange);
        assert_eq!(step2[1], AgentSetup { band: [-2.75, 2.75], dy_ref: 2.0 });
        let done = apply_phase_switch(&config, &road, ManeuverPhase::Done);
        assert_eq!(done[1], AgentSetup { band: [1.25, 2.75], dy_ref: 2.0 });
        for setups in [&step1, &step2, &done] {
            assert_eq!(setups[0], AgentSetup { band: [1.25, 2.75], dy_ref: 2.0 });
            assert_eq!(setups[2], setups[0]);
        }
    }

    #[test]
    fn detector_needs_consecutive_samples() {
        let mut d = CompletionDetector::new(2.0, 0.25, 0.02, 3);
        let near = AgentState::new(0.0, 1.9, 0.0, 14.0);
        let far = AgentState::new(0.0, 1.5, 0.0, 14.0);
        assert!(!d.observe(&near));
        assert!(!d.observe(&near));
        assert!(!d.observe(&far));
        assert!(!d.observe(&near));
        assert!(!d.observe(&near));
        assert!(d.observe(&near));
    }

    #[test]
    fn phase_labels_round_trip() {
        for p in [ManeuverPhase::EstablishHeadway, ManeuverPhase::LaneChange, ManeuverPhase::Done] {
            assert_eq!(ManeuverPhase::from_label(p.label()), Some(p));
        }
    }
}
