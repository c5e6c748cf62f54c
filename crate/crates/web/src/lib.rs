//! Browser demo: step the closed-loop lane change, roll out the vehicle model
//! under constant inputs, and solve the coordination QP for two agents.
//!
//! Every export returns JSON text. The `*_json` functions do the work and are
//! what the native tests call; the `#[wasm_bindgen]` wrappers only convert
//! errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lanechange::coordinator::{solve_coordination_qp, ConsensusState, HeadwayEdge, HeadwayGraph, SlackMode};
use lanechange::dynamics::{lateral_accel, rk4_step, AgentState, ControlInput, VehicleGeometry};
use lanechange::road::{Lane, RoadProfile};
use lanechange::runtime::{SimOptions, Simulation, TimestepTrace};
use lanechange::scenario::{ScenarioConfig, PAPER_3AGENT_TOML};
use lanechange::trace::report_summary;

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Pose of the road centerline at `s`, with the road start at the origin
/// heading along +x.
pub fn centerline_pose(road: &RoadProfile, s: f64) -> (f64, f64, f64) {
    let (mut x, mut y, mut heading) = (0.0, 0.0, 0.0);
    for seg in road.segments() {
        if s <= seg.s_start_m {
            break;
        }
        let len = s.min(seg.s_end_m) - seg.s_start_m;
        let k = seg.curvature_per_m;
        let next = heading + k * len;
        if k.abs() < 1e-12 {
            x += len * heading.cos();
            y += len * heading.sin();
        } else {
            x += (next.sin() - heading.sin()) / k;
            y -= (next.cos() - heading.cos()) / k;
        }
        heading = next;
    }
    (x, y, heading)
}

/// Cartesian position of a point `dy` to the left of the centerline.
pub fn to_cartesian(road: &RoadProfile, s: f64, dy: f64) -> [f64; 2] {
    let (x, y, h) = centerline_pose(road, s);
    [x - dy * h.sin(), y + dy * h.cos()]
}

#[derive(Debug, Serialize)]
pub struct AgentView {
    pub name: String,
    pub s: f64,
    pub dy: f64,
    pub v: f64,
    pub ax: f64,
    pub delta_deg: f64,
    pub a_y: f64,
    pub xy: [f64; 2],
    pub heading: f64,
}

#[derive(Debug, Serialize)]
pub struct StepView {
    pub t: f64,
    pub phase: String,
    pub admm_iters: usize,
    pub max_slack: f64,
    pub agents: Vec<AgentView>,
}

/// Closed-loop simulation advanced one sample at a time.
#[wasm_bindgen]
pub struct LaneChangeDemo {
    sim: Simulation,
    road: RoadProfile,
    traces: Vec<TimestepTrace>,
}

impl LaneChangeDemo {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let config = ScenarioConfig::from_toml_str(text).map_err(|e| e.to_string())?;
        let road = config.road.profile().map_err(|e| e.to_string())?;
        let options = SimOptions { parallel: false, ..SimOptions::default() };
        let sim = Simulation::new(config, options).map_err(|e| e.to_string())?;
        Ok(Self { sim, road, traces: Vec::new() })
    }

    pub fn step_view(&mut self) -> Result<StepView, String> {
        let tr = self.sim.step().map_err(|e| e.to_string())?;
        let agents = self
            .sim
            .config()
            .agents
            .iter()
            .zip(&tr.agents)
            .map(|(cfg, a)| {
                let x = a.state;
                let (_, _, h) = centerline_pose(&self.road, x.s);
                AgentView {
                    name: cfg.name.clone(),
                    s: x.s,
                    dy: x.dy,
                    v: x.v,
                    ax: a.input.ax,
                    delta_deg: a.input.delta.to_degrees(),
                    a_y: a.lateral_accel,
                    xy: to_cartesian(&self.road, x.s, x.dy),
                    heading: h + x.dpsi,
                }
            })
            .collect();
        let view = StepView {
            t: tr.time_s,
            phase: tr.phase.label().to_string(),
            admm_iters: tr.admm_iters,
            max_slack: tr.max_slack(),
            agents,
        };
        self.traces.push(tr);
        Ok(view)
    }

    pub fn summary_json(&self) -> Result<String, String> {
        let mut summary = report_summary(self.sim.config(), &self.traces);
        // browser timings are not meaningful without a monotonic clock
        summary.max_wall_time_s = 0.0;
        to_json(&summary)
    }

    /// Centerline and lane edges as Cartesian polylines over `[s_from, s_to]`.
    pub fn road_json(&self, s_from: f64, s_to: f64) -> Result<String, String> {
        let (lo, hi) = self.road.s_range();
        let (a, b) = (s_from.max(lo), s_to.min(hi));
        let w = self.road.lane_width();
        let n = ((b - a) / 2.0).ceil().max(1.0) as usize;
        let line = |dy: f64| -> Vec<[f64; 2]> {
            (0..=n).map(|i| to_cartesian(&self.road, a + (b - a) * i as f64 / n as f64, dy)).collect()
        };
        #[derive(Serialize)]
        struct RoadView {
            edges: Vec<Vec<[f64; 2]>>,
            center: Vec<[f64; 2]>,
        }
        to_json(&RoadView { edges: vec![line(-w), line(w)], center: line(0.0) })
    }
}

#[wasm_bindgen]
impl LaneChangeDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario_toml: &str) -> Result<LaneChangeDemo, JsError> {
        Self::from_toml(scenario_toml).map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self) -> Result<String, JsError> {
        self.step_view().and_then(|v| to_json(&v)).map_err(|e| JsError::new(&e))
    }

    pub fn finished(&self) -> bool {
        self.traces.len() >= self.sim.n_steps()
    }

    pub fn summary(&self) -> Result<String, JsError> {
        self.summary_json().map_err(|e| JsError::new(&e))
    }

    pub fn road(&self, s_from: f64, s_to: f64) -> Result<String, JsError> {
        self.road_json(s_from, s_to).map_err(|e| JsError::new(&e))
    }
}

#[wasm_bindgen]
pub fn default_scenario() -> String {
    PAPER_3AGENT_TOML.to_string()
}

#[derive(Debug, Serialize)]
pub struct RolloutSample {
    pub t: f64,
    pub s: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub v: f64,
    pub a_y: f64,
    pub xy: [f64; 2],
}

/// Holds `ax` and `delta` for `steps` samples of 0.1 s on a road of constant
/// curvature, starting on the right lane center.
pub fn rollout_json(v0: f64, ax: f64, delta_deg: f64, curvature: f64, steps: usize) -> Result<String, String> {
    let road = RoadProfile::constant(0.0, 5000.0, curvature, 4.0).map_err(|e| e.to_string())?;
    let geom = VehicleGeometry::default();
    let u = ControlInput::new(ax, delta_deg.to_radians());
    let mut x = AgentState::new(0.0, road.lane_center(Lane::Right), 0.0, v0);
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        out.push(RolloutSample {
            t: 0.1 * k as f64,
            s: x.s,
            dy: x.dy,
            dpsi: x.dpsi,
            v: x.v,
            a_y: lateral_accel(&x, &u, &geom).map_err(|e| e.to_string())?,
            xy: to_cartesian(&road, x.s, x.dy),
        });
        if k < steps {
            x = rk4_step(&x, &u, 0.1, &road, &geom).map_err(|e| e.to_string())?;
        }
    }
    to_json(&out)
}

#[wasm_bindgen]
pub fn rollout(v0: f64, ax: f64, delta_deg: f64, curvature: f64, steps: usize) -> Result<String, JsError> {
    rollout_json(v0, ax, delta_deg, curvature, steps).map_err(|e| JsError::new(&e))
}

#[derive(Debug, Serialize)]
pub struct QpView {
    pub leader_s: Vec<f64>,
    pub follower_s: Vec<f64>,
    pub leader_z: Vec<f64>,
    pub follower_z: Vec<f64>,
    pub slack: Vec<f64>,
    pub kkt: f64,
    pub iterations: usize,
}

/// Coordination QP for a leader and a follower whose plans start `gap` apart
/// and move at 14 m/s and `14 + dv` m/s, with zero duals.
pub fn coordination_json(gap: f64, dv: f64, q: f64, rho: f64, per_stage: bool) -> Result<String, String> {
    let n = 15;
    let leader: Vec<f64> = (0..n).map(|j| gap + 1.4 * (j + 1) as f64).collect();
    let follower: Vec<f64> = (0..n).map(|j| (1.4 + 0.1 * dv) * (j + 1) as f64).collect();
    let mode = if per_stage { SlackMode::PerStage } else { SlackMode::PerEdge };
    let edge = HeadwayEdge { follower: 1, leader: 0, slack_weight: q, until_lane_change_done: false };
    let graph = HeadwayGraph::new(vec![edge], 15.0, 2).map_err(|e| e.to_string())?.with_slack(mode);
    let s = vec![leader, follower];
    let state = ConsensusState::new(s.clone(), vec![vec![0.0; n]; 2], rho).map_err(|e| e.to_string())?;
    let c = solve_coordination_qp(&s, &state, &graph, &[0], None).map_err(|e| e.to_string())?;
    let [leader_s, follower_s]: [Vec<f64>; 2] = s.try_into().expect("two agents");
    let mut z = c.z.into_iter();
    to_json(&QpView {
        leader_s,
        follower_s,
        leader_z: z.next().unwrap_or_default(),
        follower_z: z.next().unwrap_or_default(),
        slack: c.slack,
        kkt: c.kkt.max(),
        iterations: c.qp_iterations,
    })
}

#[wasm_bindgen]
pub fn coordination(gap: f64, dv: f64, q: f64, rho: f64, per_stage: bool) -> Result<String, JsError> {
    coordination_json(gap, dv, q, rho, per_stage).map_err(|e| JsError::new(&e))
}
