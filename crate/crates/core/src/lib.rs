//! Distributed nonlinear model predictive control for a cooperative lane
//! change.
//!
//! Each agent solves a local optimal control problem with a kinematic bicycle
//! model in the Frenet frame. Minimum-headway coupling between agents is
//! handled by consensus ADMM: agents exchange predicted path coordinates and a
//! coordinator solves a small QP with softened headway constraints.

// `!(a < b)` comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centralized;
pub mod coordinator;
pub mod dynamics;
pub mod error;
pub mod ocp;
pub mod road;
pub mod runtime;
pub mod scenario;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
