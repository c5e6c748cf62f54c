//! Outer augmented-Lagrangian loop around PANOC.
//!
//! Equality constraints `h(x) = 0` enter through `mu' h + alpha/2 |h|^2`.
//! Inequalities `g(x) <= 0` enter through
//! `alpha/2 |[g + y/alpha]_+|^2 - |y|^2/(2 alpha)`, which is the plain
//! penalty `alpha/2 |[g]_+|^2` when `y = 0`. After each inner solve
//! `mu <- mu + alpha h` and `y <- [y + alpha g]_+`; the penalty grows when the
//! worst violation did not shrink enough.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::solver::panoc::{panoc_solve, BoxProblem, PanocSettings, PanocStatus};

pub trait ConstrainedProblem {
    fn dim(&self) -> usize;
    fn n_eq(&self) -> usize;

    /// Inequality rows that carry multipliers.
    fn n_ineq(&self) -> usize {
        0
    }

    fn project(&self, x: &mut [f64]);

    /// Smooth augmented cost for fixed multipliers `[mu, y]` and penalty
    /// `alpha`, with optional gradient.
    fn penalized(&self, x: &[f64], multipliers: &[f64], alpha: f64, grad: Option<&mut [f64]>) -> Result<f64>;

    /// Fills `[h, g]` as used by the penalty and returns the largest
    /// inequality violation in the problem's natural units.
    fn constraints(&self, x: &[f64], c: &mut [f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub inner_tolerance: f64,
    /// Inner tolerance of the first outer iteration; it shrinks by
    /// `inner_tolerance_factor` per outer iteration down to `inner_tolerance`.
    pub initial_inner_tolerance: f64,
    pub inner_tolerance_factor: f64,
    pub lbfgs_memory: usize,
    pub max_inner_iters: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub constraint_tolerance: f64,
    pub max_outer_iters: usize,
    /// Required relative decrease of the worst violation between outer
    /// iterations before the penalty is left unchanged.
    pub sufficient_decrease: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            inner_tolerance: 1e-4,
            initial_inner_tolerance: 1e-4,
            inner_tolerance_factor: 0.1,
            lbfgs_memory: 10,
            max_inner_iters: 500,
            initial_penalty: 100.0,
            penalty_growth: 10.0,
            max_penalty: 1e9,
            constraint_tolerance: 1e-4,
            max_outer_iters: 12,
            sufficient_decrease: 0.1,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        let positive = [
            ("solver.inner_tolerance", self.inner_tolerance),
            ("solver.initial_penalty", self.initial_penalty),
            ("solver.max_penalty", self.max_penalty),
            ("solver.constraint_tolerance", self.constraint_tolerance),
        ];
        for (field, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(field, "must be positive"));
            }
        }
        if !(self.initial_inner_tolerance >= self.inner_tolerance) {
            return Err(Error::invalid("solver.initial_inner_tolerance", "must not be below inner_tolerance"));
        }
        if !(self.inner_tolerance_factor > 0.0 && self.inner_tolerance_factor < 1.0) {
            return Err(Error::invalid("solver.inner_tolerance_factor", "must lie in (0, 1)"));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::invalid("solver.penalty_growth", "must exceed 1"));
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::invalid("solver.lbfgs_memory", "must be at least 1"));
        }
        if self.max_inner_iters == 0 || self.max_outer_iters == 0 {
            return Err(Error::invalid("solver.max_outer_iters", "iteration caps must be positive"));
        }
        if !(0.0..1.0).contains(&self.sufficient_decrease) {
            return Err(Error::invalid("solver.sufficient_decrease", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn panoc(&self) -> PanocSettings {
        PanocSettings {
            tolerance: self.inner_tolerance,
            lbfgs_memory: self.lbfgs_memory,
            max_iters: self.max_inner_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    DomainError,
}

#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub x: Vec<f64>,
    /// Final multipliers `[mu, y]`, reusable as a warm start.
    pub multipliers: Vec<f64>,
    pub penalty: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub fixed_point_residual: f64,
    pub eq_violation: f64,
    pub ineq_violation: f64,
    pub status: SolveStatus,
}

/// Multiplier and penalty state carried between solves.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmWarmStart {
    pub multipliers: Vec<f64>,
    pub penalty: f64,
}

struct FixedPenalty<'a, P: ConstrainedProblem> {
    problem: &'a P,
    mu: &'a [f64],
    alpha: f64,
}

impl<P: ConstrainedProblem> BoxProblem for FixedPenalty<'_, P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        self.problem.penalized(x, self.mu, self.alpha, grad)
    }

    fn project(&self, x: &mut [f64]) {
        self.problem.project(x)
    }
}

pub fn alm_solve<P: ConstrainedProblem>(
    problem: &P,
    warm_start: &[f64],
    warm: Option<&AlmWarmStart>,
    settings: &SolverSettings,
) -> LocalSolution {
    let mut x = warm_start.to_vec();
    let n_eq = problem.n_eq();
    let n_mult = n_eq + problem.n_ineq();
    let mut mu = match warm {
        Some(w) if w.multipliers.len() == n_mult => w.multipliers.clone(),
        _ => vec![0.0; n_mult],
    };
    let mut alpha = warm.map_or(settings.initial_penalty, |w| w.penalty).clamp(settings.initial_penalty, settings.max_penalty);
    let mut panoc = settings.panoc();
    panoc.tolerance = settings.initial_inner_tolerance;

    let mut h = vec![0.0; n_mult];
    let mut inner_iters = 0;
    let mut previous_violation = f64::INFINITY;
    let mut fixed_point_residual = f64::INFINITY;
    let mut eq_violation = f64::INFINITY;
    let mut ineq_violation = f64::INFINITY;

    for outer in 1..=settings.max_outer_iters {
        let inner = panoc_solve(&FixedPenalty { problem, mu: &mu, alpha }, &mut x, &panoc);
        inner_iters += inner.iterations;
        fixed_point_residual = inner.residual;

        let status = if inner.status == PanocStatus::DomainError {
            Some(SolveStatus::DomainError)
        } else {
            match problem.constraints(&x, &mut h) {
                Ok(g) => {
                    ineq_violation = g;
                    eq_violation = h[..n_eq].iter().fold(0.0, |m, v| m.max(v.abs()));
                    None
                }
                Err(_) => Some(SolveStatus::DomainError),
            }
        };
        if let Some(status) = status {
            return LocalSolution {
                x,
                multipliers: mu,
                penalty: alpha,
                inner_iters,
                outer_iters: outer,
                fixed_point_residual,
                eq_violation,
                ineq_violation,
                status,
            };
        }

        let violation = eq_violation.max(ineq_violation);
        let final_tolerance = panoc.tolerance <= settings.inner_tolerance;
        if violation <= settings.constraint_tolerance && inner.status == PanocStatus::Converged && final_tolerance {
            return LocalSolution {
                x,
                multipliers: mu,
                penalty: alpha,
                inner_iters,
                outer_iters: outer,
                fixed_point_residual,
                eq_violation,
                ineq_violation,
                status: SolveStatus::Converged,
            };
        }
        if outer == settings.max_outer_iters {
            break;
        }

        for (m, hv) in mu[..n_eq].iter_mut().zip(&h) {
            *m += alpha * hv;
        }
        for (y, gv) in mu[n_eq..].iter_mut().zip(&h[n_eq..]) {
            *y = (*y + alpha * gv).max(0.0);
        }
        if violation > settings.constraint_tolerance && violation > (1.0 - settings.sufficient_decrease) * previous_violation {
            alpha = (alpha * settings.penalty_growth).min(settings.max_penalty);
        }
        previous_violation = violation;
        panoc.tolerance = (panoc.tolerance * settings.inner_tolerance_factor).max(settings.inner_tolerance);
    }

    LocalSolution {
        x,
        multipliers: mu,
        penalty: alpha,
        inner_iters,
        outer_iters: settings.max_outer_iters,
        fixed_point_residual,
        eq_violation,
        ineq_violation,
        status: SolveStatus::MaxIters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `min (x - 1)^2  s.t.  x = 0`.
    struct Toy;

    impl ConstrainedProblem for Toy {
        fn dim(&self) -> usize {
            1
        }
        fn n_eq(&self) -> usize {
            1
        }
        fn project(&self, _: &mut [f64]) {}
        fn penalized(&self, x: &[f64], mu: &[f64], alpha: f64, grad: Option<&mut [f64]>) -> Result<f64> {
            let h = x[0];
            if let Some(g) = grad {
                g[0] = 2.0 * (x[0] - 1.0) + mu[0] + alpha * h;
            }
            Ok((x[0] - 1.0).powi(2) + mu[0] * h + 0.5 * alpha * h * h)
        }
        fn constraints(&self, x: &[f64], h: &mut [f64]) -> Result<f64> {
            h[0] = x[0];
            Ok(0.0)
        }
    }

    #[test]
    fn toy_equality_recovers_multiplier() {
        let settings = SolverSettings { inner_tolerance: 1e-10, constraint_tolerance: 1e-8, ..Default::default() };
        let sol = alm_solve(&Toy, &[0.5], None, &settings);
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.x[0].abs() <= 1e-8);
        // stationarity of (x - 1)^2 + mu x at x = 0
        assert!((sol.multipliers[0] - 2.0).abs() < 1e-5, "{}", sol.multipliers[0]);
    }

    #[test]
    fn feasible_start_needs_one_outer_iteration() {
        /// `min x^2  s.t. x = 0` started at the solution.
        struct Trivial;
        impl ConstrainedProblem for Trivial {
            fn dim(&self) -> usize {
                1
            }
            fn n_eq(&self) -> usize {
                1
            }
            fn project(&self, _: &mut [f64]) {}
            fn penalized(&self, x: &[f64], mu: &[f64], a: f64, grad: Option<&mut [f64]>) -> Result<f64> {
                if let Some(g) = grad {
                    g[0] = 2.0 * x[0] + mu[0] + a * x[0];
                }
                Ok(x[0] * x[0] + mu[0] * x[0] + 0.5 * a * x[0] * x[0])
            }
            fn constraints(&self, x: &[f64], h: &mut [f64]) -> Result<f64> {
                h[0] = x[0];
                Ok(0.0)
            }
        }
        let sol = alm_solve(&Trivial, &[0.0], None, &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Converged);
        assert_eq!(sol.outer_iters, 1);
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = SolverSettings { penalty_growth: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverSettings { lbfgs_memory: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
