//! PANOC: forward-backward splitting on a box, accelerated with L-BFGS
//! directions on the fixed-point residual and safeguarded by a line search on
//! the forward-backward envelope.

use crate::error::{Error, Result};
use crate::solver::lbfgs::{axpy, dot, Lbfgs};

/// Smooth cost with a cheap projection onto its feasible box.
pub trait BoxProblem {
    fn dim(&self) -> usize;

    /// Cost value; fills `grad` when given.
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64>;

    fn project(&self, x: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanocSettings {
    /// Bound on `|x - proj(x - gamma grad)|_inf / gamma`.
    pub tolerance: f64,
    pub lbfgs_memory: usize,
    pub max_iters: usize,
}

impl Default for PanocSettings {
    fn default() -> Self {
        Self { tolerance: 1e-4, lbfgs_memory: 10, max_iters: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanocStatus {
    Converged,
    MaxIters,
    DomainError,
}

#[derive(Debug, Clone)]
pub struct PanocOutcome {
    pub status: PanocStatus,
    pub iterations: usize,
    pub residual: f64,
    pub cost: f64,
    /// `(gamma, envelope value)` at every accepted iterate.
    pub merit_history: Vec<(f64, f64)>,
}

const GAMMA_L: f64 = 0.95;
const LS_BETA: f64 = 0.5;
const MAX_LINE_SEARCH: usize = 12;
const MIN_L: f64 = 1e-8;
const MAX_L: f64 = 1e12;

/// Everything derived from one iterate at a given step size.
struct Point {
    x: Vec<f64>,
    cost: f64,
    grad: Vec<f64>,
    /// `x - proj(x - gamma grad)`
    residual: Vec<f64>,
    /// Cost at the projected gradient point.
    bar_cost: Option<f64>,
}

impl Point {
    fn new<P: BoxProblem>(problem: &P, x: Vec<f64>, gamma: f64) -> Result<Self> {
        let mut grad = vec![0.0; x.len()];
        let cost = problem.evaluate(&x, Some(&mut grad))?;
        if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::domain("non-finite cost or gradient"));
        }
        let mut p = Self { residual: Vec::new(), x, cost, grad, bar_cost: None };
        p.refresh(problem, gamma);
        Ok(p)
    }

    fn refresh<P: BoxProblem>(&mut self, problem: &P, gamma: f64) {
        let mut bar: Vec<f64> = self.x.iter().zip(&self.grad).map(|(x, g)| x - gamma * g).collect();
        problem.project(&mut bar);
        self.residual = self.x.iter().zip(&bar).map(|(x, b)| x - b).collect();
        self.bar_cost = None;
    }

    fn bar(&self) -> Vec<f64> {
        self.x.iter().zip(&self.residual).map(|(x, r)| x - r).collect()
    }

    fn envelope(&self, gamma: f64) -> f64 {
        self.cost - dot(&self.grad, &self.residual) + dot(&self.residual, &self.residual) / (2.0 * gamma)
    }

    fn norm_inf(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn estimate_lipschitz<P: BoxProblem>(problem: &P, p: &Point) -> f64 {
    let n = p.x.len();
    let mut shifted = p.x.clone();
    let mut delta_sq = 0.0;
    for v in shifted.iter_mut() {
        let d = (1e-6 * v.abs()).max(1e-6);
        *v += d;
        delta_sq += d * d;
    }
    let mut g = vec![0.0; n];
    match problem.evaluate(&shifted, Some(&mut g)) {
        Ok(_) => {
            let dg: f64 = g.iter().zip(&p.grad).map(|(a, b)| (a - b) * (a - b)).sum();
            (dg.sqrt() / delta_sq.sqrt()).clamp(MIN_L, MAX_L)
        }
        Err(_) => 1.0,
    }
}

/// Minimizes the problem starting from (and overwriting) `x`.
pub fn panoc_solve<P: BoxProblem>(problem: &P, x: &mut [f64], settings: &PanocSettings) -> PanocOutcome {
    let mut start = x.to_vec();
    problem.project(&mut start);

    let failed = |iterations, cost| PanocOutcome {
        status: PanocStatus::DomainError,
        iterations,
        residual: f64::INFINITY,
        cost,
        merit_history: Vec::new(),
    };

    let mut gamma = 1.0;
    let mut point = match Point::new(problem, start, gamma) {
        Ok(p) => p,
        Err(_) => return failed(0, f64::NAN),
    };
    let mut lip = estimate_lipschitz(problem, &point);
    gamma = GAMMA_L / lip;
    point.refresh(problem, gamma);

    let mut lbfgs = Lbfgs::new(settings.lbfgs_memory);
    let mut merit_history = Vec::new();
    let mut iterations = 0;

    loop {
        // Backtrack on the Lipschitz estimate until the quadratic upper bound
        // holds at the projected gradient point.
        loop {
            let bar = point.bar();
            let fbar = problem.evaluate(&bar, None).ok().filter(|f| f.is_finite());
            let bound = point.cost - dot(&point.grad, &point.residual)
                + lip / 2.0 * dot(&point.residual, &point.residual)
                + 1e-12 * point.cost.abs();
            match fbar {
                Some(f) if f <= bound => {
                    point.bar_cost = Some(f);
                    break;
                }
                _ if lip < MAX_L => {
                    lip *= 2.0;
                    gamma /= 2.0;
                    lbfgs.reset();
                    point.refresh(problem, gamma);
                }
                Some(f) => {
                    point.bar_cost = Some(f);
                    break;
                }
                None => {
                    x.copy_from_slice(&point.x);
                    return failed(iterations, point.cost);
                }
            }
        }

        let residual = point.norm_inf() / gamma;
        let envelope = point.envelope(gamma);
        merit_history.push((gamma, envelope));

        if residual <= settings.tolerance || iterations >= settings.max_iters {
            // the projected gradient point is feasible by construction
            x.copy_from_slice(&point.bar());
            return PanocOutcome {
                status: if residual <= settings.tolerance { PanocStatus::Converged } else { PanocStatus::MaxIters },
                iterations,
                residual,
                cost: point.bar_cost.unwrap_or(point.cost),
                merit_history,
            };
        }
        iterations += 1;

        let mut direction: Vec<f64> = point.residual.iter().map(|r| -r).collect();
        if !lbfgs.is_empty() {
            lbfgs.apply(&mut direction);
        }

        let rr = dot(&point.residual, &point.residual);
        let sigma = LS_BETA * (1.0 - gamma * lip) / (2.0 * gamma);
        let target = envelope - sigma * rr;

        let mut tau = 1.0;
        let mut next: Option<Point> = None;
        for attempt in 0..=MAX_LINE_SEARCH {
            if attempt == MAX_LINE_SEARCH {
                tau = 0.0;
            }
            // x+ = x - (1 - tau) r + tau d
            let mut cand = point.x.clone();
            axpy(&mut cand, -(1.0 - tau), &point.residual);
            if tau > 0.0 {
                axpy(&mut cand, tau, &direction);
            }
            match Point::new(problem, cand, gamma) {
                Ok(p) if tau == 0.0 || p.envelope(gamma) <= target => {
                    next = Some(p);
                    break;
                }
                Ok(_) | Err(_) if tau > 0.0 => tau *= 0.5,
                _ => break,
            }
        }

        let Some(next) = next else {
            x.copy_from_slice(&point.x);
            return failed(iterations, point.cost);
        };

        let s: Vec<f64> = next.x.iter().zip(&point.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.residual.iter().zip(&point.residual).map(|(a, b)| a - b).collect();
        lbfgs.update(s, y);
        point = next;
    }
}
