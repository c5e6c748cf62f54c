//! Primal active-set method for convex QPs with a diagonal, possibly
//! singular, Hessian:
//!
//! ```text
//! minimize 1/2 x' diag(h) x + c' x   subject to   A x <= b
//! ```
//!
//! The caller supplies a feasible start and a linearly independent working set
//! on which the reduced Hessian is positive definite. Rows added by the ratio
//! test keep the working set independent; rows are only dropped when their
//! multiplier is negative.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DiagonalQp {
    pub hessian_diag: Vec<f64>,
    pub linear: Vec<f64>,
    /// Constraint rows, stored sparsely as `(column, coefficient)` pairs.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub working_set: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_infeasibility).max(self.dual_infeasibility).max(self.complementarity)
    }
}

impl DiagonalQp {
    pub fn dim(&self) -> usize {
        self.hessian_diag.len()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(c, a)| a * x[c]).sum()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.hessian_diag)
            .zip(&self.linear)
            .map(|((x, h), c)| 0.5 * h * x * x + c * x)
            .sum()
    }

    pub fn kkt_residuals(&self, x: &[f64], multipliers: &[f64]) -> KktResiduals {
        let mut grad: Vec<f64> = (0..self.dim()).map(|i| self.hessian_diag[i] * x[i] + self.linear[i]).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, a) in row {
                grad[c] += a * multipliers[i];
            }
        }
        let mut res = KktResiduals {
            stationarity: grad.iter().fold(0.0, |m, g| m.max(g.abs())),
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
            complementarity: 0.0,
        };
        for i in 0..self.rows.len() {
            let slack = self.rhs[i] - self.row_dot(i, x);
            res.primal_infeasibility = res.primal_infeasibility.max(-slack);
            res.dual_infeasibility = res.dual_infeasibility.max(-multipliers[i]);
            res.complementarity = res.complementarity.max((multipliers[i] * slack).abs());
        }
        res
    }

    /// Whether `row` is linearly independent of the rows in `working`.
    fn independent_of(&self, row: usize, working: &[usize]) -> bool {
        if working.is_empty() {
            return true;
        }
        let n = self.dim();
        let mut a = DMatrix::<f64>::zeros(n, working.len());
        for (k, &r) in working.iter().enumerate() {
            for &(c, v) in &self.rows[r] {
                a[(c, k)] = v;
            }
        }
        let mut b = DVector::<f64>::zeros(n);
        for &(c, v) in &self.rows[row] {
            b[c] = v;
        }
        // least-squares residual of b against the working rows
        let svd = a.clone().svd(true, true);
        let coef = match svd.solve(&b, 1e-12) {
            Ok(c) => c,
            Err(_) => return true,
        };
        (&b - a * coef).norm() > 1e-9 * b.norm()
    }

    /// First column with zero curvature that no working row touches, with its
    /// objective gradient.
    fn free_flat_column(&self, x: &[f64], working: &[usize]) -> Option<(usize, f64)> {
        (0..self.dim())
            .filter(|&c| self.hessian_diag[c] == 0.0)
            .find(|&c| !working.iter().any(|&r| self.rows[r].iter().any(|&(rc, a)| rc == c && a != 0.0)))
            .map(|c| (c, self.hessian_diag[c] * x[c] + self.linear[c]))
    }

    /// Solves the equality-constrained step problem on `working`; returns the
    /// step and the working-set multipliers.
    fn eqp_step(&self, x: &[f64], working: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let m = working.len();
        let mut kkt = DMatrix::<f64>::zeros(n + m, n + m);
        let mut rhs = DVector::<f64>::zeros(n + m);
        for i in 0..n {
            kkt[(i, i)] = self.hessian_diag[i];
            rhs[i] = -(self.hessian_diag[i] * x[i] + self.linear[i]);
        }
        // flat columns outside every working row only reach here with zero
        // gradient; keep them fixed
        for i in 0..n {
            if self.hessian_diag[i] == 0.0 && !working.iter().any(|&r| self.rows[r].iter().any(|&(c, a)| c == i && a != 0.0)) {
                kkt[(i, i)] = 1.0;
                rhs[i] = 0.0;
            }
        }
        for (k, &row) in working.iter().enumerate() {
            for &(c, a) in &self.rows[row] {
                kkt[(n + k, c)] = a;
                kkt[(c, n + k)] = a;
            }
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::domain("singular KKT system in active-set QP"))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite KKT solution in active-set QP"));
        }
        let p = sol.rows(0, n).iter().copied().collect();
        let nu = sol.rows(n, m).iter().copied().collect();
        Ok((p, nu))
    }

    pub fn solve(&self, start: Vec<f64>, working_set: Vec<usize>, max_iters: usize) -> Result<QpSolution> {
        let mut x = start;
        let mut working = working_set;
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let step_tol = 1e-13 * scale;
        let feas_tol = 1e-11 * scale;

        for i in 0..self.rows.len() {
            if self.row_dot(i, &x) > self.rhs[i] + feas_tol {
                return Err(Error::domain("active-set QP started from an infeasible point"));
            }
        }

        for iteration in 1..=max_iters {
            let free = self.free_flat_column(&x, &working);
            let (p, nu, ray) = match free {
                Some((c, g)) if g.abs() > 0.0 => {
                    // zero curvature and no working row: descend until blocked
                    let mut p = vec![0.0; self.dim()];
                    p[c] = -g.signum();
                    (p, Vec::new(), true)
                }
                _ => {
                    let (p, nu) = self.eqp_step(&x, &working)?;
                    (p, nu, false)
                }
            };
            let p_norm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));

            if p_norm <= step_tol {
                let (k_min, nu_min) = nu
                    .iter()
                    .enumerate()
                    .fold((usize::MAX, 0.0), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
                let nu_tol = 1e-10 * (1.0 + nu.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                if k_min == usize::MAX || nu_min >= -nu_tol {
                    let mut multipliers = vec![0.0; self.rows.len()];
                    for (k, &row) in working.iter().enumerate() {
                        multipliers[row] = nu[k].max(0.0);
                    }
                    return Ok(QpSolution { x, multipliers, working_set: working, iterations: iteration });
                }
                working.remove(k_min);
                continue;
            }

            // ratio test over rows outside the working set
            let mut candidates: Vec<(f64, usize)> = (0..self.rows.len())
                .filter(|i| !working.contains(i))
                .filter_map(|i| {
                    let ap = self.row_dot(i, &p);
                    (ap > 1e-14 * p_norm).then(|| ((self.rhs[i] - self.row_dot(i, &x)).max(0.0) / ap, i))
                })
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            // rows dependent on the working set only block through roundoff
            let first = candidates.iter().find(|&&(_, i)| self.independent_of(i, &working));
            let (step, blocking) = match first {
                Some(&(t, i)) if t < 1.0 || ray => (t, Some(i)),
                _ => (if ray { f64::INFINITY } else { 1.0 }, None),
            };
            if !step.is_finite() {
                return Err(Error::domain("active-set QP is unbounded below"));
            }
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += step * pi;
            }
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        Err(Error::domain("active-set QP iteration limit reached"))
    }
}
