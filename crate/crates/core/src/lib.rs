//! Energy-efficiency-optimal transmission for the multi-user MIMO downlink.
//!
//! The downlink (broadcast channel with dirty paper coding) is solved through
//! its dual uplink: the energy efficiency
//!
//! ```text
//!   W log2 det(I + (1/sigma^2) sum_i H_i^H Q_i H_i) / (sum_i Tr(Q_i)/eta + M p_dyn + p_sta)
//! ```
//!
//! is maximized over the uplink covariances `Q_i` by cyclic block updates,
//! each of which is a concave fractional program solved in closed form up to
//! a scalar water level. The optimal uplink covariances are then mapped to
//! downlink covariances with the same sum rate and total power.
//!
//! Modules:
//! - [`linalg`]: Hermitian eigendecomposition, log-determinants, matrix roots.
//! - [`model`]: power model, pathloss, channel draws, scenario files.
//! - [`objective`]: sum rate, energy efficiency, per-user decomposition.
//! - [`waterfill`]: the single-user energy-efficient waterfilling step.
//! - [`solver`]: the iterative block-coordinate ascent.
//! - [`duality`]: uplink-to-downlink mapping and the DPC sum rate.
//! - [`oracle`]: brute-force reference solvers for small instances.
//! - [`experiments`]: convergence and parameter sweeps with CSV output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duality;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod solver;
pub mod waterfill;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use model::{ChannelSet, PowerModel, Scenario, ScenarioConfig};
pub use objective::{CovarianceSet, UserDecomposition};
pub use solver::{SolverConfig, SolverTrace};
