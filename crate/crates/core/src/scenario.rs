//! Scenario files: road, agents, headway graph, and solver/ADMM settings.
//!
//! Scenarios are TOML documents. Every physical quantity carries its unit in
//! the field name (`d_hw_m`, `v_ref_mps`, `delta_max_deg`, ...).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coordinator::{HeadwayEdge, HeadwayGraph};
use crate::dynamics::{AgentState, VehicleGeometry};
use crate::error::{Error, Result};
use crate::ocp::{CostWeights, StageBounds};
use crate::road::{CurvatureSegment, Lane, RoadProfile};
use crate::runtime::NetworkModel;
use crate::solver::SolverSettings;

/// Scenario shipped with the repository: three agents on a curved two-lane
/// road, the subject agent merging between two vehicles in the left lane.
pub const PAPER_3AGENT_TOML: &str = include_str!("../../../scenarios/paper_3agent.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub road: RoadConfig,
    pub horizon: HorizonConfig,
    pub admm: AdmmConfig,
    pub headway: HeadwayConfig,
    pub maneuver: ManeuverConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub network: NetworkModel,
    pub simulation: SimulationConfig,
    pub agents: Vec<AgentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub lane_width_m: f64,
    /// Admissible `dy` band while driving in the right lane.
    pub right_lane_band_m: [f64; 2],
    pub left_lane_band_m: [f64; 2],
    /// Band used by the subject agent while it changes lanes.
    pub both_lanes_band_m: [f64; 2],
    pub segments: Vec<CurvatureSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub n_stages: usize,
    pub sample_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps_primal_m: f64,
    pub eps_dual: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub dual_residual: crate::coordinator::DualResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadwayConfig {
    pub d_hw_m: f64,
    #[serde(default)]
    pub slack: crate::coordinator::SlackMode,
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub follower: String,
    pub leader: String,
    pub slack_weight: f64,
    #[serde(default)]
    pub until_lane_change_done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeuverConfig {
    /// Agent that changes lanes; `None` disables the maneuver.
    pub subject_agent: Option<String>,
    pub target_lane: Lane,
    pub completion_dy_tol_m: f64,
    pub completion_dpsi_tol_rad: f64,
    pub completion_samples: usize,
    /// Slack allowed when checking predicted gaps against `d_hw`.
    #[serde(default)]
    pub headway_check_tol_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub end_time_s: f64,
    /// Reserved; the simulation is deterministic.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub s_m: f64,
    pub dy_m: f64,
    pub dpsi_rad: f64,
    pub v_mps: f64,
}

impl From<InitialState> for AgentState {
    fn from(x: InitialState) -> Self {
        AgentState::new(x.s_m, x.dy_m, x.dpsi_rad, x.v_mps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentLimits {
    pub v_max_mps: f64,
    pub ax_min_mps2: f64,
    pub ax_max_mps2: f64,
    pub delta_max_deg: f64,
    pub ay_max_mps2: f64,
    pub atot_max_mps2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    pub lane: Lane,
    pub initial: InitialState,
    pub v_ref_mps: f64,
    pub geometry: VehicleGeometry,
    pub weights: CostWeights,
    pub limits: AgentLimits,
}

impl AgentConfig {
    /// Stage limits with the `dy` band of `band`.
    pub fn stage_bounds(&self, band: [f64; 2]) -> StageBounds {
        let delta = self.limits.delta_max_deg.to_radians();
        StageBounds {
            dy_lo: band[0],
            dy_hi: band[1],
            v_hi: self.limits.v_max_mps,
            ax_lo: self.limits.ax_min_mps2,
            ax_hi: self.limits.ax_max_mps2,
            delta_lo: -delta,
            delta_hi: delta,
            ay_hi: self.limits.ay_max_mps2,
            atot_hi: self.limits.atot_max_mps2,
        }
    }
}

fn ordered(band: [f64; 2]) -> [f64; 2] {
    if band[0] <= band[1] {
        band
    } else {
        [band[1], band[0]]
    }
}

impl RoadConfig {
    /// The `dy` band of a lane; either endpoint order is accepted.
    pub fn lane_band(&self, lane: Lane) -> [f64; 2] {
        match lane {
            Lane::Right => ordered(self.right_lane_band_m),
            Lane::Left => ordered(self.left_lane_band_m),
        }
    }

    pub fn both_band(&self) -> [f64; 2] {
        ordered(self.both_lanes_band_m)
    }

    pub fn profile(&self) -> Result<RoadProfile> {
        RoadProfile::new(self.segments.clone(), self.lane_width_m)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn paper_3agent() -> Self {
        Self::from_toml_str(PAPER_3AGENT_TOML).expect("shipped scenario is valid")
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    pub fn subject_index(&self) -> Option<usize> {
        self.maneuver.subject_agent.as_deref().and_then(|n| self.agent_index(n))
    }

    pub fn headway_graph(&self) -> Result<HeadwayGraph> {
        let lookup = |name: &str| {
            self.agent_index(name)
                .ok_or_else(|| Error::invalid("headway.edges", format!("unknown agent `{name}`")))
        };
        let edges = self
            .headway
            .edges
            .iter()
            .map(|e| {
                Ok(HeadwayEdge {
                    follower: lookup(&e.follower)?,
                    leader: lookup(&e.leader)?,
                    slack_weight: e.slack_weight,
                    until_lane_change_done: e.until_lane_change_done,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HeadwayGraph::new(edges, self.headway.d_hw_m, self.agents.len())?.with_slack(self.headway.slack))
    }

    pub fn validate(&self) -> Result<()> {
        let road = self.road.profile()?;
        for (field, band) in [
            ("road.right_lane_band_m", self.road.right_lane_band_m),
            ("road.left_lane_band_m", self.road.left_lane_band_m),
            ("road.both_lanes_band_m", self.road.both_lanes_band_m),
        ] {
            if !(band[0] < band[1]) && !(band[1] < band[0]) {
                return Err(Error::invalid(field, "band must have distinct endpoints"));
            }
            if band.iter().any(|b| b.abs() * road.max_abs_curvature() >= 1.0) {
                return Err(Error::invalid(field, "band reaches the curvature singularity"));
            }
        }
        if self.horizon.n_stages == 0 {
            return Err(Error::invalid("horizon.n_stages", "must be at least 1"));
        }
        if !(self.horizon.sample_time_s > 0.0) {
            return Err(Error::invalid("horizon.sample_time_s", "must be positive"));
        }
        if !(self.admm.rho > 0.0) {
            return Err(Error::invalid("admm.rho", "must be positive"));
        }
        if !(self.admm.eps_primal_m >= 0.0 && self.admm.eps_dual >= 0.0) {
            return Err(Error::invalid("admm.eps_primal_m", "thresholds must be nonnegative"));
        }
        if self.admm.max_iters == 0 {
            return Err(Error::invalid("admm.max_iters", "must be at least 1"));
        }
        if !(self.network.latency_per_message_s >= 0.0) {
            return Err(Error::invalid("network.latency_per_message_s", "must be nonnegative"));
        }
        if !(self.simulation.end_time_s >= 0.0) {
            return Err(Error::invalid("simulation.end_time_s", "must be nonnegative"));
        }
        if !(self.maneuver.headway_check_tol_m >= 0.0) {
            return Err(Error::invalid("maneuver.headway_check_tol_m", "must be nonnegative"));
        }
        self.solver.validate()?;
        if self.agents.is_empty() {
            return Err(Error::invalid("agents", "at least one agent required"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::invalid("agents.name", format!("duplicate agent `{}`", a.name)));
            }
            let field = format!("agents[{}]", a.name);
            a.geometry.validate(&format!("{field}.geometry"))?;
            a.weights.validate(&format!("{field}.weights"))?;
            a.stage_bounds(self.road.lane_band(a.lane)).validate(&format!("{field}.limits"))?;
            if !(a.v_ref_mps >= 0.0 && a.v_ref_mps <= a.limits.v_max_mps) {
                return Err(Error::invalid(format!("{field}.v_ref_mps"), "must lie in [0, v_max_mps]"));
            }
            let band = self.road.lane_band(a.lane);
            if !(a.initial.dy_m >= band[0] && a.initial.dy_m <= band[1]) {
                return Err(Error::invalid(format!("{field}.initial.dy_m"), "must lie inside the lane band"));
            }
            let (lo, hi) = road.s_range();
            if !(a.initial.s_m >= lo && a.initial.s_m < hi) {
                return Err(Error::invalid(format!("{field}.initial.s_m"), "outside the road profile"));
            }
        }
        if let Some(name) = &self.maneuver.subject_agent {
            if self.agent_index(name).is_none() {
                return Err(Error::invalid("maneuver.subject_agent", format!("unknown agent `{name}`")));
            }
        }
        if self.maneuver.completion_samples == 0 {
            return Err(Error::invalid("maneuver.completion_samples", "must be at least 1"));
        }
        self.headway_graph()?;
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}
