//! Numerical solvers: PANOC for box-constrained smooth problems, the
//! augmented Lagrangian / penalty outer loop, and a small active-set QP.

pub mod alm;
mod lbfgs;
pub mod panoc;
pub mod qp;

pub use alm::{alm_solve, AlmWarmStart, ConstrainedProblem, LocalSolution, SolveStatus, SolverSettings};
pub use panoc::{panoc_solve, BoxProblem, PanocOutcome, PanocSettings, PanocStatus};
pub use qp::{DiagonalQp, KktResiduals, QpSolution};
