//! Controller taskload for stochastic flows of aircraft.
//!
//! Each aircraft deviates from its nominal trajectory along three axes as an
//! Ornstein-Uhlenbeck process; a controller intervention happens whenever a
//! deviation reaches a tolerance bound. Aircraft arrive as a Poisson flow.
//! The crate provides analytic taskload distributions and Monte Carlo
//! experiments that check them.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod axes;
pub mod calibration;
pub mod cli;
pub mod distributions;
pub mod flow;
pub mod hitting;
pub mod mc;
pub mod ou_process;
pub mod pmf;

pub use axes::{Axis, AxisSet, AxisTriple};
pub use distributions::{JohnsonSuParams, MomentSet, ParamError, RandomSource};
pub use ou_process::{Barrier, Monitoring, OuParams};
pub use pmf::{EmpiricalPmf, TaskloadPmf};
