//! Identification of linear discrete-time systems from trajectory data by
//! regularized kernel regression, with extensions for diverging trajectories
//! (norm rescaling), topological entropy of the estimate, and LQR stabilization
//! through the discrete algebraic Riccati equation.
//!
//! The crate is organized as a pipeline:
//!
//! * [`dynamics`] generates trajectories (optionally noisy / perturbed),
//! * [`kernels`] provides kernel functions, Gram matrices and the regularized
//!   least-squares solver,
//! * [`sysid`] estimates the system matrices from a trajectory,
//! * [`modelsel`] picks regularization strength by hold-out validation,
//! * [`spectral`] computes eigenvalues, stability verdicts and entropy,
//! * [`lqr`] solves the Riccati equation and analyses closed loops,
//! * [`bounds`] evaluates the computable sample-error bound,
//! * [`metrics`] measures prediction and matrix-estimate errors.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod lqr;
pub mod metrics;
pub mod modelsel;
pub mod spectral;
pub mod sysid;

pub use error::{Error, Result};
