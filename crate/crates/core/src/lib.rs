//! Simulation of continuously monitored spin systems whose feedback is driven
//! by an estimated filter started from a possibly wrong initial state.
//!
//! The actual filter `rho_t` and the estimate `rho_hat_t` obey coupled
//! stochastic master equations sharing one Wiener path; the feedback `u` only
//! sees `rho_hat_t`. The crate provides the operators, the drift/diffusion
//! superoperators, an Euler-Maruyama integrator with projection onto the state
//! space, feedback laws, diagnostics, and Monte-Carlo ensemble tooling with the
//! statistical checks used to study convergence of the pair.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod sde;

pub use control::Controller;
pub use dynamics::{CoupledState, PhysicalParams};
pub use error::{Error, Result};
pub use metrics::Metric;
pub use operators::{BlochVector, Convention, DensityMatrix, SpinOperators};
