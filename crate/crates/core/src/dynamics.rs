//! Kinematic bicycle model in Frenet coordinates and its RK4 discretization.
//!
//! State `x = [s, dy, dpsi, v]`, input `u = [a_x, delta]`:
//!
//! ```text
//! s'    = v cos(dpsi + beta) / (1 - dy kappa(s))
//! dy'   = v sin(dpsi + beta)
//! dpsi' = v sin(beta) / l_r - v cos(dpsi) kappa(s) / (1 - dy kappa(s))
//! v'    = a_x
//! beta  = atan(tan(delta) l_r / (l_f + l_r))
//! ```
//!
//! Curvature is piecewise constant, so `d kappa / ds = 0` almost everywhere and
//! the Jacobians below treat it as locally constant.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road::RoadProfile;

pub const NX: usize = 4;
pub const NU: usize = 2;

pub type StateVec = [f64; NX];
pub type InputVec = [f64; NU];
pub type StateJacobian = [[f64; NX]; NX];
pub type InputJacobian = [[f64; NU]; NX];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub s: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub v: f64,
}

impl AgentState {
    pub fn new(s: f64, dy: f64, dpsi: f64, v: f64) -> Self {
        Self { s, dy, dpsi, v }
    }

    pub fn to_array(self) -> StateVec {
        [self.s, self.dy, self.dpsi, self.v]
    }

    pub fn from_array(a: StateVec) -> Self {
        Self { s: a[0], dy: a[1], dpsi: a[2], v: a[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub ax: f64,
    pub delta: f64,
}

impl ControlInput {
    pub fn new(ax: f64, delta: f64) -> Self {
        Self { ax, delta }
    }

    pub fn to_array(self) -> InputVec {
        [self.ax, self.delta]
    }

    pub fn from_array(a: InputVec) -> Self {
        Self { ax: a[0], delta: a[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    /// Center of gravity to front axle.
    pub lf_m: f64,
    /// Center of gravity to rear axle.
    pub lr_m: f64,
    pub length_m: f64,
    pub width_m: f64,
}

impl VehicleGeometry {
    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.lf_m > 0.0 && self.lr_m > 0.0) {
            return Err(Error::invalid(field, "axle distances must be positive"));
        }
        if !(self.length_m >= self.lf_m + self.lr_m) {
            return Err(Error::invalid(field, "length must cover the wheelbase"));
        }
        if !(self.width_m > 0.0) {
            return Err(Error::invalid(field, "width must be positive"));
        }
        Ok(())
    }

    fn rear_ratio(&self) -> f64 {
        self.lr_m / (self.lf_m + self.lr_m)
    }
}

impl Default for VehicleGeometry {
    fn default() -> Self {
        Self { lf_m: 1.4, lr_m: 1.4, length_m: 5.0, width_m: 2.0 }
    }
}

fn check_steering(delta: f64) -> Result<()> {
    if delta.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::domain(format!("steering angle {delta} rad outside (-pi/2, pi/2)")))
    }
}

/// Vehicle sideslip angle at the center of gravity.
pub fn sideslip(delta: f64, geom: &VehicleGeometry) -> Result<f64> {
    check_steering(delta)?;
    Ok((delta.tan() * geom.rear_ratio()).atan())
}

/// `(beta, d beta / d delta)`.
fn sideslip_with_derivative(delta: f64, geom: &VehicleGeometry) -> Result<(f64, f64)> {
    check_steering(delta)?;
    let c = geom.rear_ratio();
    let t = delta.tan();
    let beta = (t * c).atan();
    let dbeta = c * (1.0 + t * t) / (1.0 + c * c * t * t);
    Ok((beta, dbeta))
}

fn singularity_factor(dy: f64, kappa: f64) -> Result<f64> {
    let d = 1.0 - dy * kappa;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::domain(format!("1 - dy*kappa = {d} <= 0 (dy = {dy}, kappa = {kappa})")))
    }
}

pub fn dynamics_rhs(
    x: &AgentState,
    u: &ControlInput,
    kappa: f64,
    geom: &VehicleGeometry,
) -> Result<StateVec> {
    rhs(&x.to_array(), &u.to_array(), kappa, geom)
}

fn rhs(x: &StateVec, u: &InputVec, kappa: f64, geom: &VehicleGeometry) -> Result<StateVec> {
    let [_, dy, dpsi, v] = *x;
    let beta = sideslip(u[1], geom)?;
    let d = singularity_factor(dy, kappa)?;
    let heading = dpsi + beta;
    Ok([
        v * heading.cos() / d,
        v * heading.sin(),
        v / geom.lr_m * beta.sin() - v * dpsi.cos() * kappa / d,
        u[0],
    ])
}

fn rhs_with_jacobian(
    x: &StateVec,
    u: &InputVec,
    kappa: f64,
    geom: &VehicleGeometry,
) -> Result<(StateVec, StateJacobian, InputJacobian)> {
    let [_, dy, dpsi, v] = *x;
    let (beta, dbeta) = sideslip_with_derivative(u[1], geom)?;
    let d = singularity_factor(dy, kappa)?;
    let (sh, ch) = (dpsi + beta).sin_cos();
    let (sp, cp) = dpsi.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let lr = geom.lr_m;

    let f = [v * ch / d, v * sh, v / lr * sb - v * cp * kappa / d, u[0]];

    let mut a = [[0.0; NX]; NX];
    a[0][1] = v * ch * kappa / (d * d);
    a[0][2] = -v * sh / d;
    a[0][3] = ch / d;
    a[1][2] = v * ch;
    a[1][3] = sh;
    a[2][1] = -v * cp * kappa * kappa / (d * d);
    a[2][2] = v * sp * kappa / d;
    a[2][3] = sb / lr - cp * kappa / d;

    let mut b = [[0.0; NU]; NX];
    b[0][1] = -v * sh / d * dbeta;
    b[1][1] = v * ch * dbeta;
    b[2][1] = v / lr * cb * dbeta;
    b[3][0] = 1.0;

    Ok((f, a, b))
}

fn axpy(x: &StateVec, h: f64, k: &StateVec) -> StateVec {
    std::array::from_fn(|i| x[i] + h * k[i])
}

fn curvature(profile: &RoadProfile, x: &StateVec) -> Result<f64> {
    profile.curvature_at(x[0])
}

/// One classical RK4 step with the input held over `[t, t + ts]`.
/// Curvature is looked up at every stage's own `s`.
pub fn rk4_step(
    x: &AgentState,
    u: &ControlInput,
    ts: f64,
    profile: &RoadProfile,
    geom: &VehicleGeometry,
) -> Result<AgentState> {
    rk4(&x.to_array(), &u.to_array(), ts, profile, geom).map(AgentState::from_array)
}

pub(crate) fn rk4(
    x: &StateVec,
    u: &InputVec,
    ts: f64,
    profile: &RoadProfile,
    geom: &VehicleGeometry,
) -> Result<StateVec> {
    let k1 = rhs(x, u, curvature(profile, x)?, geom)?;
    let x2 = axpy(x, 0.5 * ts, &k1);
    let k2 = rhs(&x2, u, curvature(profile, &x2)?, geom)?;
    let x3 = axpy(x, 0.5 * ts, &k2);
    let k3 = rhs(&x3, u, curvature(profile, &x3)?, geom)?;
    let x4 = axpy(x, ts, &k3);
    let k4 = rhs(&x4, u, curvature(profile, &x4)?, geom)?;
    Ok(std::array::from_fn(|i| x[i] + ts / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// RK4 step together with its sensitivities `d x+ / d x` and `d x+ / d u`.
pub(crate) fn rk4_with_jacobian(
    x: &StateVec,
    u: &InputVec,
    ts: f64,
    profile: &RoadProfile,
    geom: &VehicleGeometry,
) -> Result<(StateVec, StateJacobian, InputJacobian)> {
    // Sensitivities of each stage point with respect to (x, u).
    let ident: StateJacobian = std::array::from_fn(|i| std::array::from_fn(|j| f64::from(i == j)));
    let zero_u: InputJacobian = [[0.0; NU]; NX];

    let mut ks: [StateVec; 4] = [[0.0; NX]; 4];
    let mut kx: [StateJacobian; 4] = [[[0.0; NX]; NX]; 4];
    let mut ku: [InputJacobian; 4] = [[[0.0; NU]; NX]; 4];
    let offsets = [0.0, 0.5 * ts, 0.5 * ts, ts];

    for stage in 0..4 {
        let (xp, px, pu) = if stage == 0 {
            (*x, ident, zero_u)
        } else {
            let h = offsets[stage];
            let prev = stage - 1;
            let xp = axpy(x, h, &ks[prev]);
            let px: StateJacobian =
                std::array::from_fn(|i| std::array::from_fn(|j| ident[i][j] + h * kx[prev][i][j]));
            let pu: InputJacobian = std::array::from_fn(|i| std::array::from_fn(|j| h * ku[prev][i][j]));
            (xp, px, pu)
        };
        let (f, a, b) = rhs_with_jacobian(&xp, u, curvature(profile, &xp)?, geom)?;
        ks[stage] = f;
        for i in 0..NX {
            for j in 0..NX {
                kx[stage][i][j] = (0..NX).map(|m| a[i][m] * px[m][j]).sum();
            }
            for j in 0..NU {
                ku[stage][i][j] = b[i][j] + (0..NX).map(|m| a[i][m] * pu[m][j]).sum::<f64>();
            }
        }
    }

    let w = [1.0, 2.0, 2.0, 1.0];
    let next = std::array::from_fn(|i| x[i] + ts / 6.0 * (0..4).map(|k| w[k] * ks[k][i]).sum::<f64>());
    let jx = std::array::from_fn(|i| {
        std::array::from_fn(|j| ident[i][j] + ts / 6.0 * (0..4).map(|k| w[k] * kx[k][i][j]).sum::<f64>())
    });
    let ju = std::array::from_fn(|i| {
        std::array::from_fn(|j| ts / 6.0 * (0..4).map(|k| w[k] * ku[k][i][j]).sum::<f64>())
    });
    Ok((next, jx, ju))
}

/// `a_y = (v cos beta)(v sin beta) / l_r`.
pub fn lateral_accel(x: &AgentState, u: &ControlInput, geom: &VehicleGeometry) -> Result<f64> {
    lateral_accel_with_derivatives(x.v, u.delta, geom).map(|(ay, _, _)| ay)
}

/// `(a_y, d a_y / d v, d a_y / d delta)`.
pub(crate) fn lateral_accel_with_derivatives(
    v: f64,
    delta: f64,
    geom: &VehicleGeometry,
) -> Result<(f64, f64, f64)> {
    let (beta, dbeta) = sideslip_with_derivative(delta, geom)?;
    // cos(b) sin(b) = sin(2b) / 2
    let (s2, c2) = (2.0 * beta).sin_cos();
    let lr = geom.lr_m;
    let ay = v * v * s2 / (2.0 * lr);
    let day_dv = v * s2 / lr;
    let day_ddelta = v * v * c2 / lr * dbeta;
    Ok((ay, day_dv, day_ddelta))
}

/// Squared total acceleration `a_x^2 + a_y^2`.
pub fn total_accel_sq(x: &AgentState, u: &ControlInput, geom: &VehicleGeometry) -> Result<f64> {
    let ay = lateral_accel(x, u, geom)?;
    Ok(u.ax * u.ax + ay * ay)
}
