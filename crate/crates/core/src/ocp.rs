//! Local optimal control problem of a single agent.
//!
//! The decision vector stacks `N` stages. Stage `m` holds the predicted state
//! `x_{k+m+1}` followed by the input `u_{k+m}` that drives it, so every stage
//! is six numbers `[s, dy, dpsi, v, a_x, delta]`. The measured state `x_k` is
//! problem data, not a decision variable (multiple shooting).
//!
//! The smooth objective handed to the local solver is
//!
//! ```text
//! Phi = sum_j l_j + l_N                       tracking
//!     + mu' h + alpha/2 |h|^2                 dynamics (augmented Lagrangian)
//!     + alpha/2 |[g]_+|^2                     acceleration limits (quadratic penalty)
//!     + lambda' s + rho/2 |s - z|^2           consensus terms from the coordinator
//! ```

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    lateral_accel_with_derivatives, rk4, rk4_with_jacobian, AgentState, ControlInput, StateVec,
    VehicleGeometry, NU, NX,
};
use crate::error::{Error, Result};
use crate::road::RoadProfile;
use crate::solver::ConstrainedProblem;

pub const STAGE_DIM: usize = NX + NU;
/// Inequality rows per stage: `|a_y| - a_y_max` and `a_tot^2 - a_tot_max^2`.
pub const INEQ_PER_STAGE: usize = 2;

/// Per-agent optimization variable, `N` stages of `(x_{k+j}, u_{k+j-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrajectory {
    data: Vec<f64>,
}

impl DecisionTrajectory {
    pub fn zeros(horizon: usize) -> Self {
        Self { data: vec![0.0; horizon * STAGE_DIM] }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(STAGE_DIM) {
            return Err(Error::Dimension(format!(
                "decision vector length {} is not a positive multiple of {STAGE_DIM}",
                data.len()
            )));
        }
        Ok(Self { data })
    }

    pub fn from_stages(stages: &[(AgentState, ControlInput)]) -> Self {
        let mut data = Vec::with_capacity(stages.len() * STAGE_DIM);
        for (x, u) in stages {
            data.extend_from_slice(&x.to_array());
            data.extend_from_slice(&u.to_array());
        }
        Self { data }
    }

    /// Roll the model forward from `x0` under the given inputs.
    pub fn rollout(
        x0: &AgentState,
        inputs: &[ControlInput],
        ts: f64,
        road: &RoadProfile,
        geom: &VehicleGeometry,
    ) -> Result<Self> {
        let mut stages = Vec::with_capacity(inputs.len());
        let mut x = x0.to_array();
        for u in inputs {
            x = rk4(&x, &u.to_array(), ts, road, geom)?;
            stages.push((AgentState::from_array(x), *u));
        }
        Ok(Self::from_stages(&stages))
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / STAGE_DIM
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Predicted state `x_{k+m+1}`.
    pub fn state(&self, m: usize) -> AgentState {
        let o = m * STAGE_DIM;
        AgentState::new(self.data[o], self.data[o + 1], self.data[o + 2], self.data[o + 3])
    }

    /// Input `u_{k+m}`.
    pub fn input(&self, m: usize) -> ControlInput {
        let o = m * STAGE_DIM + NX;
        ControlInput::new(self.data[o], self.data[o + 1])
    }

    /// Consensus selector `C_cc xi`: the path coordinate of every stage.
    pub fn path_coordinates(&self) -> Vec<f64> {
        self.data.iter().step_by(STAGE_DIM).copied().collect()
    }

    pub fn stages(&self) -> impl Iterator<Item = (AgentState, ControlInput)> + '_ {
        (0..self.horizon()).map(|m| (self.state(m), self.input(m)))
    }

    /// Receding-horizon shift: drop the first stage and append one more by
    /// applying the last input again to the last state.
    pub fn shifted(&self, ts: f64, road: &RoadProfile, geom: &VehicleGeometry) -> Result<Self> {
        let n = self.horizon();
        let mut data = Vec::with_capacity(self.data.len());
        data.extend_from_slice(&self.data[STAGE_DIM..]);
        let last_x = self.state(n - 1).to_array();
        let last_u = self.input(n - 1).to_array();
        let next = rk4(&last_x, &last_u, ts, road, geom)?;
        data.extend_from_slice(&next);
        data.extend_from_slice(&last_u);
        Ok(Self { data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub q_s: f64,
    pub q_dy: f64,
    pub q_dpsi: f64,
    pub q_v: f64,
    pub qn_s: f64,
    pub qn_dy: f64,
    pub qn_dpsi: f64,
    pub qn_v: f64,
    pub r_ax: f64,
    pub r_delta: f64,
}

impl CostWeights {
    pub fn validate(&self, field: &str) -> Result<()> {
        let q = [self.q_s, self.q_dy, self.q_dpsi, self.q_v, self.qn_s, self.qn_dy, self.qn_dpsi, self.qn_v];
        if q.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(field, "state weights must be finite and nonnegative"));
        }
        if !(self.r_ax > 0.0 && self.r_delta > 0.0) || !self.r_ax.is_finite() || !self.r_delta.is_finite() {
            return Err(Error::invalid(field, "input weights must be finite and positive"));
        }
        Ok(())
    }

    fn stage_q(&self) -> StateVec {
        [self.q_s, self.q_dy, self.q_dpsi, self.q_v]
    }

    fn terminal_q(&self) -> StateVec {
        [self.qn_s, self.qn_dy, self.qn_dpsi, self.qn_v]
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            q_s: 0.0,
            q_dy: 1.0,
            q_dpsi: 100.0,
            q_v: 1.0,
            qn_s: 0.0,
            qn_dy: 1.0,
            qn_dpsi: 100.0,
            qn_v: 1.0,
            r_ax: 1.0,
            r_delta: 600.0,
        }
    }
}

/// Box and acceleration limits for one prediction stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageBounds {
    pub dy_lo: f64,
    pub dy_hi: f64,
    pub v_hi: f64,
    pub ax_lo: f64,
    pub ax_hi: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub ay_hi: f64,
    pub atot_hi: f64,
}

impl StageBounds {
    pub fn validate(&self, field: &str) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::invalid(field, what)) };
        check(self.dy_lo < self.dy_hi, "dy_lo must be below dy_hi")?;
        check(self.v_hi > 0.0, "v_hi must be positive")?;
        check(self.ax_lo < 0.0 && 0.0 < self.ax_hi, "a_x bounds must bracket zero")?;
        check(self.delta_lo < 0.0 && 0.0 < self.delta_hi, "steering bounds must bracket zero")?;
        check(
            self.delta_lo > -std::f64::consts::FRAC_PI_2 && self.delta_hi < std::f64::consts::FRAC_PI_2,
            "steering bounds must lie strictly inside (-pi/2, pi/2)",
        )?;
        check(self.ay_hi > 0.0, "a_y bound must be positive")?;
        check(self.atot_hi > 0.0, "total acceleration bound must be positive")
    }

    pub fn with_dy(self, dy_lo: f64, dy_hi: f64) -> Self {
        Self { dy_lo, dy_hi, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageReference {
    pub s: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub v: f64,
}

impl StageReference {
    fn to_array(self) -> StateVec {
        [self.s, self.dy, self.dpsi, self.v]
    }
}

/// Coordinator data seen by one agent in an ADMM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmLocalData {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: f64,
}

fn weighted_sq(d: &StateVec, w: &StateVec) -> f64 {
    d.iter().zip(w).map(|(d, w)| w * d * d).sum()
}

fn diff(x: &StateVec, r: &StateVec) -> StateVec {
    std::array::from_fn(|i| x[i] - r[i])
}

/// `u' R u + (x - x_ref)' Q (x - x_ref)` with diagonal weights.
pub fn stage_cost(x: &AgentState, u: &ControlInput, reference: &StageReference, w: &CostWeights) -> f64 {
    w.r_ax * u.ax * u.ax
        + w.r_delta * u.delta * u.delta
        + weighted_sq(&diff(&x.to_array(), &reference.to_array()), &w.stage_q())
}

pub fn terminal_cost(x: &AgentState, reference: &StageReference, w: &CostWeights) -> f64 {
    weighted_sq(&diff(&x.to_array(), &reference.to_array()), &w.terminal_q())
}

/// Everything an agent needs to state its NLP at one sampling instant.
#[derive(Debug, Clone)]
pub struct AgentProblem<'a> {
    pub x0: AgentState,
    pub road: &'a RoadProfile,
    pub geom: VehicleGeometry,
    pub ts: f64,
    pub weights: CostWeights,
    /// Limits for stages `m = 0..N`, i.e. states `x_{k+1..=k+N}` and inputs
    /// `u_{k..k+N}`.
    pub bounds: Vec<StageBounds>,
    /// References for time indices `k..=k+N`.
    pub refs: Vec<StageReference>,
    pub admm: Option<AdmmLocalData>,
}

impl<'a> AgentProblem<'a> {
    pub fn horizon(&self) -> usize {
        self.bounds.len()
    }

    pub fn dim(&self) -> usize {
        self.horizon() * STAGE_DIM
    }

    pub fn n_eq(&self) -> usize {
        self.horizon() * NX
    }

    pub fn n_ineq(&self) -> usize {
        self.horizon() * INEQ_PER_STAGE
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.horizon();
        if n == 0 {
            return Err(Error::Dimension("horizon must be at least one stage".into()));
        }
        if self.refs.len() != n + 1 {
            return Err(Error::Dimension(format!("expected {} references, got {}", n + 1, self.refs.len())));
        }
        if let Some(admm) = &self.admm {
            if admm.z.len() != n || admm.lambda.len() != n {
                return Err(Error::Dimension("consensus data must have one entry per stage".into()));
            }
            if !(admm.rho > 0.0) {
                return Err(Error::invalid("rho", "penalty must be positive"));
            }
        }
        Ok(())
    }

    fn state_at(&self, xi: &[f64], time_index: usize) -> StateVec {
        if time_index == 0 {
            self.x0.to_array()
        } else {
            let o = (time_index - 1) * STAGE_DIM;
            [xi[o], xi[o + 1], xi[o + 2], xi[o + 3]]
        }
    }

    /// Sum of stage and terminal tracking costs.
    pub fn tracking_cost(&self, xi: &[f64]) -> f64 {
        let n = self.horizon();
        let mut cost = 0.0;
        for j in 0..n {
            let x = AgentState::from_array(self.state_at(xi, j));
            let o = j * STAGE_DIM + NX;
            let u = ControlInput::new(xi[o], xi[o + 1]);
            cost += stage_cost(&x, &u, &self.refs[j], &self.weights);
        }
        cost + terminal_cost(&AgentState::from_array(self.state_at(xi, n)), &self.refs[n], &self.weights)
    }

    /// Multiple-shooting defects `x_{k+m+1} - f_d(x_{k+m}, u_{k+m})`.
    pub fn dynamics_residual(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut h = vec![0.0; self.n_eq()];
        self.fill_dynamics_residual(xi, &mut h)?;
        Ok(h)
    }

    pub fn fill_dynamics_residual(&self, xi: &[f64], h: &mut [f64]) -> Result<()> {
        for m in 0..self.horizon() {
            let prev = self.state_at(xi, m);
            let o = m * STAGE_DIM;
            let next = rk4(&prev, &[xi[o + NX], xi[o + NX + 1]], self.ts, self.road, &self.geom)?;
            for i in 0..NX {
                h[m * NX + i] = xi[o + i] - next[i];
            }
        }
        Ok(())
    }

    /// Acceleration constraints `g <= 0` for `j = 0..N`, pairing `u_{k+j}`
    /// with `x_{k+j}`.
    pub fn inequality_residual(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n_ineq()];
        for j in 0..self.horizon() {
            let row = self.inequality_rows(xi, j)?;
            g[j * INEQ_PER_STAGE] = row.ay_row;
            g[j * INEQ_PER_STAGE + 1] = row.atot_row;
        }
        Ok(g)
    }

    fn inequality_rows(&self, xi: &[f64], j: usize) -> Result<InequalityRows> {
        let v = self.state_at(xi, j)[3];
        let o = j * STAGE_DIM + NX;
        let (ax, delta) = (xi[o], xi[o + 1]);
        let b = &self.bounds[j];
        let (ay, day_dv, day_ddelta) = lateral_accel_with_derivatives(v, delta, &self.geom)?;
        Ok(InequalityRows {
            ay_row: ay.abs() - b.ay_hi,
            atot_row: ax * ax + ay * ay - b.atot_hi * b.atot_hi,
            ay,
            day_dv,
            day_ddelta,
            ax,
        })
    }

    /// Largest positive part of any inequality row.
    pub fn inequality_violation(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.inequality_residual(xi)?.into_iter().fold(0.0, |m, g| m.max(g)))
    }

    pub fn smooth_objective(&self, xi: &[f64], mu: &[f64], alpha: f64) -> Result<f64> {
        self.evaluate(xi, mu, alpha, None)
    }

    pub fn smooth_objective_gradient(&self, xi: &[f64], mu: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; xi.len()];
        self.evaluate(xi, mu, alpha, Some(&mut grad))?;
        Ok(grad)
    }

    /// Weights applied to the two inequality rows of stage `j` by the
    /// solver's penalty. They bring the steering sensitivity of both rows to
    /// order one; the zero sets are unchanged.
    fn row_scales(&self, j: usize) -> (f64, f64) {
        let b = &self.bounds[j];
        let w_ay = 1.0 / (b.v_hi * b.v_hi / (self.geom.lf_m + self.geom.lr_m)).max(1.0);
        (w_ay, w_ay / (2.0 * b.atot_hi))
    }

    /// Value of `Phi` and, when requested, its gradient in one sweep.
    pub fn evaluate(&self, xi: &[f64], mu: &[f64], alpha: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        debug_assert_eq!(mu.len(), self.n_eq());
        self.evaluate_impl(xi, mu, &[], alpha, false, grad)
    }

    /// The form minimized by the local solver: inequality rows are scaled by
    /// [`Self::row_scales`] and carry their own multipliers `y >= 0`, giving
    /// `alpha/2 |[g~ + y/alpha]_+|^2 - |y|^2/(2 alpha)` in place of the plain
    /// penalty. `multipliers` is `[mu (4N), y (2N)]`.
    pub fn evaluate_augmented(
        &self,
        xi: &[f64],
        multipliers: &[f64],
        alpha: f64,
        grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        debug_assert_eq!(multipliers.len(), self.n_eq() + self.n_ineq());
        let (mu, y) = multipliers.split_at(self.n_eq());
        self.evaluate_impl(xi, mu, y, alpha, true, grad)
    }

    fn evaluate_impl(
        &self,
        xi: &[f64],
        mu: &[f64],
        y: &[f64],
        alpha: f64,
        scaled: bool,
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let n = self.horizon();
        debug_assert_eq!(xi.len(), self.dim());
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let w = &self.weights;
        let q = w.stage_q();
        let mut value = 0.0;

        for j in 0..n {
            let o = j * STAGE_DIM;
            let (ax, delta) = (xi[o + NX], xi[o + NX + 1]);

            // l_j: input part on stage j, state part on x_{k+j}
            value += w.r_ax * ax * ax + w.r_delta * delta * delta;
            let xj = self.state_at(xi, j);
            let dj = diff(&xj, &self.refs[j].to_array());
            value += weighted_sq(&dj, &q);
            if let Some(g) = grad.as_deref_mut() {
                g[o + NX] += 2.0 * w.r_ax * ax;
                g[o + NX + 1] += 2.0 * w.r_delta * delta;
                if j > 0 {
                    let po = (j - 1) * STAGE_DIM;
                    for i in 0..NX {
                        g[po + i] += 2.0 * q[i] * dj[i];
                    }
                }
            }

            // dynamics defect of stage j
            let u = [ax, delta];
            let c: StateVec;
            if let Some(g) = grad.as_deref_mut() {
                let (next, jx, ju) = rk4_with_jacobian(&xj, &u, self.ts, self.road, &self.geom)?;
                let h: StateVec = std::array::from_fn(|i| xi[o + i] - next[i]);
                c = std::array::from_fn(|i| mu[j * NX + i] + alpha * h[i]);
                value += (0..NX).map(|i| mu[j * NX + i] * h[i] + 0.5 * alpha * h[i] * h[i]).sum::<f64>();
                for i in 0..NX {
                    g[o + i] += c[i];
                }
                for col in 0..NU {
                    g[o + NX + col] -= (0..NX).map(|r| ju[r][col] * c[r]).sum::<f64>();
                }
                if j > 0 {
                    let po = (j - 1) * STAGE_DIM;
                    for col in 0..NX {
                        g[po + col] -= (0..NX).map(|r| jx[r][col] * c[r]).sum::<f64>();
                    }
                }
            } else {
                let next = rk4(&xj, &u, self.ts, self.road, &self.geom)?;
                for i in 0..NX {
                    let h = xi[o + i] - next[i];
                    value += mu[j * NX + i] * h + 0.5 * alpha * h * h;
                }
            }

            // acceleration penalties on (x_{k+j}, u_{k+j})
            let rows = self.inequality_rows(xi, j)?;
            let (w_ay, w_tot) = if scaled { self.row_scales(j) } else { (1.0, 1.0) };
            let (y_ay, y_tot) = if y.is_empty() { (0.0, 0.0) } else { (y[j * INEQ_PER_STAGE], y[j * INEQ_PER_STAGE + 1]) };
            let p_ay = (w_ay * rows.ay_row + y_ay / alpha).max(0.0);
            let p_tot = (w_tot * rows.atot_row + y_tot / alpha).max(0.0);
            value += 0.5 * alpha * (p_ay * p_ay + p_tot * p_tot) - (y_ay * y_ay + y_tot * y_tot) / (2.0 * alpha);
            if let Some(g) = grad.as_deref_mut() {
                if p_ay > 0.0 || p_tot > 0.0 {
                    // d|a_y| = sign(a_y) d a_y ; d(a_tot^2) = 2 a_x d a_x + 2 a_y d a_y
                    let (c_ay, c_tot) = (alpha * p_ay * w_ay, alpha * p_tot * w_tot);
                    let coef_ay = c_ay * rows.ay.signum() + c_tot * 2.0 * rows.ay;
                    g[o + NX] += c_tot * 2.0 * rows.ax;
                    g[o + NX + 1] += coef_ay * rows.day_ddelta;
                    if j > 0 {
                        g[(j - 1) * STAGE_DIM + 3] += coef_ay * rows.day_dv;
                    }
                }
            }
        }

        // terminal cost on x_{k+N}
        let xn = self.state_at(xi, n);
        let dn = diff(&xn, &self.refs[n].to_array());
        let qn = w.terminal_q();
        value += weighted_sq(&dn, &qn);
        if let Some(g) = grad.as_deref_mut() {
            let po = (n - 1) * STAGE_DIM;
            for i in 0..NX {
                g[po + i] += 2.0 * qn[i] * dn[i];
            }
        }

        if let Some(admm) = &self.admm {
            for m in 0..n {
                let s = xi[m * STAGE_DIM];
                let gap = s - admm.z[m];
                value += admm.lambda[m] * s + 0.5 * admm.rho * gap * gap;
                if let Some(g) = grad.as_deref_mut() {
                    g[m * STAGE_DIM] += admm.lambda[m] + admm.rho * gap;
                }
            }
        }

        Ok(value)
    }

    /// Clamp `dy`, `v`, `a_x` and `delta` into the stage boxes. `s` and
    /// `dpsi` are unbounded.
    pub fn project_box(&self, xi: &mut [f64]) {
        project_stages(xi, &self.bounds);
    }
}

pub(crate) fn project_stages(xi: &mut [f64], bounds: &[StageBounds]) {
    for (stage, b) in xi.chunks_exact_mut(STAGE_DIM).zip(bounds) {
        stage[1] = stage[1].clamp(b.dy_lo, b.dy_hi);
        stage[3] = stage[3].clamp(0.0, b.v_hi);
        stage[4] = stage[4].clamp(b.ax_lo, b.ax_hi);
        stage[5] = stage[5].clamp(b.delta_lo, b.delta_hi);
    }
}

impl ConstrainedProblem for AgentProblem<'_> {
    fn dim(&self) -> usize {
        AgentProblem::dim(self)
    }

    fn n_eq(&self) -> usize {
        AgentProblem::n_eq(self)
    }

    fn project(&self, x: &mut [f64]) {
        self.project_box(x)
    }

    fn n_ineq(&self) -> usize {
        AgentProblem::n_ineq(self)
    }

    fn penalized(&self, x: &[f64], multipliers: &[f64], alpha: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        self.evaluate_augmented(x, multipliers, alpha, grad)
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) -> Result<f64> {
        let (h, g) = c.split_at_mut(self.n_eq());
        self.fill_dynamics_residual(x, h)?;
        let mut worst = 0.0f64;
        for j in 0..self.horizon() {
            let rows = self.inequality_rows(x, j)?;
            let (w_ay, w_tot) = self.row_scales(j);
            g[j * INEQ_PER_STAGE] = w_ay * rows.ay_row;
            g[j * INEQ_PER_STAGE + 1] = w_tot * rows.atot_row;
            worst = worst.max(rows.ay_row).max(rows.atot_row);
        }
        Ok(worst)
    }
}

struct InequalityRows {
    ay_row: f64,
    atot_row: f64,
    ay: f64,
    day_dv: f64,
    day_ddelta: f64,
    ax: f64,
}
