//! One RK4 step against a fine reference integration, and the observed order.

mod common;

use lanechange::dynamics::{ControlInput, NX};
use lanechange::ocp::{AgentProblem, DecisionTrajectory, STAGE_DIM};
use lanechange::scenario::ScenarioConfig;
use rand::Rng;

#[test]
fn single_step_matches_fine_integration() {
    let worst = common::integration::single_step_error(11, 200);
    assert!(worst <= 1e-6, "worst per-state error {worst:e}");
}

#[test]
fn observed_order_is_four() {
    let orders = common::integration::observed_orders();
    assert!(orders.iter().all(|o| (o - 4.0).abs() < 0.3), "observed orders {orders:?}");
}

#[test]
fn rollout_has_zero_dynamics_residual() {
    let config = ScenarioConfig::paper_3agent();
    let road = config.road.profile().unwrap();
    let mut rng = common::rng(3);
    for phase in common::PHASES {
        for p in common::phase_problems(&config, &road, phase) {
            let inputs: Vec<ControlInput> = (0..p.horizon())
                .map(|_| ControlInput::new(rng.gen_range(-4.0..4.0), rng.gen_range(-0.08..0.08)))
                .collect();
            let mut xi = DecisionTrajectory::rollout(&p.x0, &inputs, p.ts, p.road, &p.geom).unwrap().into_vec();
            let h = p.dynamics_residual(&xi).unwrap();
            assert!(h.iter().all(|r| r.abs() < 1e-12), "{h:?}");

            // a nudge on x_{k+m+1} shows up as the defect of stage m
            let m = 4;
            xi[m * STAGE_DIM + 1] += 0.01;
            let h = p.dynamics_residual(&xi).unwrap();
            assert!((h[m * NX + 1] - 0.01).abs() < 1e-12);
            check_defects_against_model(&p, &xi, &h);
        }
    }
}

/// Recomputes every defect with the reference model at 1000 substeps.
fn check_defects_against_model(p: &AgentProblem<'_>, xi: &[f64], h: &[f64]) {
    let mut prev = p.x0.to_array();
    for (m, stage) in xi.chunks_exact(STAGE_DIM).enumerate() {
        let kappa = p.road.curvature_at(prev[0]).unwrap();
        let next = common::fine_integrate(prev, [stage[4], stage[5]], p.ts, 1000, |_| kappa, p.geom.lf_m, p.geom.lr_m);
        for i in 0..NX {
            assert!((stage[i] - next[i] - h[m * NX + i]).abs() < 1e-6);
        }
        prev = [stage[0], stage[1], stage[2], stage[3]];
    }
}
