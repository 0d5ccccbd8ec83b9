//! Safety filters for articulated robots built on the safe set algorithm:
//! naive SSA, relaxed SSA and projected SSA, together with the kinematics,
//! collision geometry, QP solver, simulator and metrics they rely on.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod constraints;
pub mod filters;
pub mod kinematics;
pub mod metrics;
pub mod qp;
pub mod simulator;
