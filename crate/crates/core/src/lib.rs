//! Self-organizing multi-agent voltage regulation on meshed distribution
//! networks.
//!
//! The pipeline: solve an AC power flow ([`powerflow`]), extract the
//! injection-to-voltage sensitivity matrix, epsilon-decompose it into
//! autonomous subnetworks ([`decomposition`]), and let a four-role agent
//! system ([`mas`]) dispatch distributed generators through small per-
//! subnetwork linear programs ([`lp`], [`regulation`]). The [`scenario`]
//! module drives whole simulations with event timelines and baselines.

pub mod decomposition;
pub mod fixtures;
pub mod grid;
pub mod lp;
pub mod mas;
pub mod powerflow;
pub mod regulation;
pub mod scenario;

pub use grid::{load_grid, parse_grid, save_grid, DgMode, GridModel};
pub use powerflow::{compute_losses, compute_sensitivity, solve_power_flow, Init};
