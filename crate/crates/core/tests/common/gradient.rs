//! Merit gradient against central finite differences.

use lanechange::dynamics::ControlInput;
use lanechange::ocp::{AdmmLocalData, AgentProblem, DecisionTrajectory, STAGE_DIM};
use lanechange::scenario::ScenarioConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A point near a feasible rollout: random admissible inputs, then the states
/// jittered so the dynamics defects are nonzero.
fn random_point(p: &AgentProblem<'_>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = p.bounds[0];
    let inputs: Vec<ControlInput> = (0..p.horizon())
        .map(|_| {
            // keep |delta| away from 0, where |a_y| has a kink
            let mag = rng.gen_range(0.05..1.0) * b.delta_hi;
            let delta = if rng.gen_bool(0.5) { mag } else { -mag };
            ControlInput::new(rng.gen_range(b.ax_lo..b.ax_hi), delta)
        })
        .collect();
    let mut xi = DecisionTrajectory::rollout(&p.x0, &inputs, p.ts, p.road, &p.geom).unwrap().into_vec();
    for stage in xi.chunks_exact_mut(STAGE_DIM) {
        stage[0] += rng.gen_range(-0.5..0.5);
        stage[1] += rng.gen_range(-0.1..0.1);
        stage[2] += rng.gen_range(-0.02..0.02);
        stage[3] += rng.gen_range(-0.5..0.5);
    }
    xi
}

fn with_admm_data(p: &AgentProblem<'_>, xi: &[f64], rng: &mut ChaCha8Rng) -> Option<AdmmLocalData> {
    if rng.gen_bool(0.3) {
        return None;
    }
    let z = xi.iter().step_by(STAGE_DIM).map(|s| s + rng.gen_range(-2.0..2.0)).collect();
    let lambda = (0..p.horizon()).map(|_| rng.gen_range(-20.0..20.0)).collect();
    Some(AdmmLocalData { z, lambda, rho: 100.0 })
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// `|fd - grad|_inf / max(1, |grad|_inf)`.
fn relative_error(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) -> f64 {
    let mut x = x.to_vec();
    let fd: Vec<f64> = (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            let x0 = x[i];
            x[i] = x0 + h;
            let up = f(&x);
            x[i] = x0 - h;
            let down = f(&x);
            x[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect();
    max_abs(fd.iter().zip(grad).map(|(a, b)| a - b)) / max_abs(grad.iter().copied()).max(1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct GradientReport {
    pub points: usize,
    pub worst: f64,
}

/// Plain and augmented merit gradients at `per_agent` random points for every
/// agent and phase of the shipped scenario.
pub fn merit_gradient_check(seed: u64, per_agent: usize) -> GradientReport {
    let config = ScenarioConfig::paper_3agent();
    let road = config.road.profile().unwrap();
    let mut rng = super::rng(seed);
    let mut points = 0;
    let mut worst = 0.0f64;
    for phase in super::PHASES {
        for base in super::phase_problems(&config, &road, phase) {
            for _ in 0..per_agent {
                let xi = random_point(&base, &mut rng);
                let mut p = base.clone();
                p.admm = with_admm_data(&p, &xi, &mut rng);
                let alpha = 10f64.powf(rng.gen_range(0.0..3.0));
                let mu: Vec<f64> = (0..p.n_eq()).map(|_| rng.gen_range(-50.0..50.0)).collect();

                let grad = p.smooth_objective_gradient(&xi, &mu, alpha).unwrap();
                worst = worst.max(relative_error(|x| p.smooth_objective(x, &mu, alpha).unwrap(), &xi, &grad));

                let mut multipliers = mu.clone();
                multipliers.extend((0..p.n_ineq()).map(|_| rng.gen_range(0.0..5.0)));
                let mut grad = vec![0.0; xi.len()];
                p.evaluate_augmented(&xi, &multipliers, alpha, Some(&mut grad)).unwrap();
                worst = worst.max(relative_error(
                    |x| p.evaluate_augmented(x, &multipliers, alpha, None).unwrap(),
                    &xi,
                    &grad,
                ));
                points += 1;
            }
        }
    }
    GradientReport { points, worst }
}
