//! Independent reference models shared by the integration tests.
#![allow(dead_code)]

pub mod gradient;
pub mod integration;
pub mod qp;

use lanechange::dynamics::AgentState;
use lanechange::ocp::AgentProblem;
use lanechange::road::RoadProfile;
use lanechange::runtime::{apply_phase_switch, build_agent_problems, ManeuverPhase};
use lanechange::scenario::ScenarioConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PHASES: [ManeuverPhase; 3] =
    [ManeuverPhase::EstablishHeadway, ManeuverPhase::LaneChange, ManeuverPhase::Done];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Kinematic bicycle in path coordinates, written out from the model
/// equations.
pub fn model_rhs(x: [f64; 4], u: [f64; 2], kappa: f64, lf: f64, lr: f64) -> [f64; 4] {
    let [_, dy, dpsi, v] = x;
    let [ax, delta] = u;
    let beta = (delta.tan() * lr / (lf + lr)).atan();
    let d = 1.0 - dy * kappa;
    [v * (dpsi + beta).cos() / d, v * (dpsi + beta).sin(), v / lr * beta.sin() - v * dpsi.cos() * kappa / d, ax]
}

/// Classical RK4 with `substeps` equal steps over `t`.
pub fn fine_integrate(
    x: [f64; 4],
    u: [f64; 2],
    t: f64,
    substeps: usize,
    kappa: impl Fn(f64) -> f64,
    lf: f64,
    lr: f64,
) -> [f64; 4] {
    let h = t / substeps as f64;
    let f = |x: [f64; 4]| model_rhs(x, u, kappa(x[0]), lf, lr);
    let add = |x: [f64; 4], k: [f64; 4], c: f64| -> [f64; 4] { std::array::from_fn(|i| x[i] + c * k[i]) };
    let mut x = x;
    for _ in 0..substeps {
        let k1 = f(x);
        let k2 = f(add(x, k1, h / 2.0));
        let k3 = f(add(x, k2, h / 2.0));
        let k4 = f(add(x, k3, h));
        x = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    x
}

/// `a_y = v^2 cos(beta) sin(beta) / l_r`.
pub fn model_lateral_accel(v: f64, delta: f64, lf: f64, lr: f64) -> f64 {
    let beta = (delta.tan() * lr / (lf + lr)).atan();
    v * beta.cos() * v * beta.sin() / lr
}

/// Local problems of the shipped three-agent scenario in `phase`, started
/// from the scenario's initial states.
pub fn phase_problems<'a>(config: &ScenarioConfig, road: &'a RoadProfile, phase: ManeuverPhase) -> Vec<AgentProblem<'a>> {
    let states: Vec<AgentState> = config.agents.iter().map(|a| a.initial.into()).collect();
    let setups = apply_phase_switch(config, road, phase);
    build_agent_problems(config, road, &states, &setups)
}
