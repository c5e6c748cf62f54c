//! RK4 steps of the library against the reference integrator.

use lanechange::dynamics::{rk4_step, AgentState, ControlInput, VehicleGeometry};
use lanechange::road::RoadProfile;
use rand::Rng;

pub const KAPPA: f64 = 0.005;

pub fn road() -> RoadProfile {
    RoadProfile::constant(-100.0, 3000.0, KAPPA, 4.0).unwrap()
}

/// Largest per-state gap between one library step and a 1000-substep
/// reference over `samples` random states and inputs.
pub fn single_step_error(seed: u64, samples: usize) -> f64 {
    let road = road();
    let geom = VehicleGeometry::default();
    let delta_max = 5f64.to_radians();
    let mut rng = super::rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = AgentState::new(
            rng.gen_range(0.0..1000.0),
            rng.gen_range(-2.75..2.75),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(0.0..17.0),
        );
        let u = ControlInput::new(rng.gen_range(-4.0..4.0), rng.gen_range(-delta_max..delta_max));
        let step = rk4_step(&x, &u, 0.1, &road, &geom).unwrap().to_array();
        let fine = super::fine_integrate(x.to_array(), u.to_array(), 0.1, 1000, |_| KAPPA, geom.lf_m, geom.lr_m);
        for i in 0..4 {
            worst = worst.max((step[i] - fine[i]).abs());
        }
    }
    worst
}

/// Orders observed from the global error over 2 s at h = 0.2, 0.1, 0.05.
pub fn observed_orders() -> Vec<f64> {
    let road = road();
    let geom = VehicleGeometry::default();
    let x0 = AgentState::new(10.0, -2.0, 0.05, 15.0);
    let u = ControlInput::new(2.0, 5f64.to_radians());
    let horizon = 2.0;
    let reference = super::fine_integrate(x0.to_array(), u.to_array(), horizon, 20_000, |_| KAPPA, geom.lf_m, geom.lr_m);
    let error = |h: f64| {
        let steps = (horizon / h).round() as usize;
        let mut x = x0;
        for _ in 0..steps {
            x = rk4_step(&x, &u, h, &road, &geom).unwrap();
        }
        let x = x.to_array();
        (0..4).map(|i| (x[i] - reference[i]).abs()).fold(0.0, f64::max)
    };
    let errors: Vec<f64> = [0.2, 0.1, 0.05].into_iter().map(error).collect();
    errors.windows(2).map(|pair| (pair[0] / pair[1]).log2()).collect()
}
