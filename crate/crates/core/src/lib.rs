//! Simulation and verification of second-order consensus among non-identical
//! agents driven by nonlinear protocols, with and without a leader.
//!
//! - [`graph`]: weighted undirected topology, Laplacian, connectivity and
//!   leader reachability.
//! - [`protocols`]: the function families `f`, `h`, `b(t)`, assumption
//!   checks and the control inputs.
//! - [`dynamics`]: closed-loop right-hand side, RK4 integration and the exact
//!   leader trajectory.
//! - [`analysis`]: Lyapunov functions, conserved quantity, consensus-value
//!   predictors and consensus detection.
//! - [`scenario_file`], [`output`], [`cli`]: scenario files, run artifacts and
//!   the command-line front end.

// NaN-rejecting checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod output;
pub mod protocols;
pub mod scenario_file;

pub use dynamics::{simulate, LeaderState, Mode, Scenario, SystemState, Trajectory};
pub use error::{Error, Result};
pub use graph::Topology;
