//! Time-optimal purification of a qubit coupled to a dissipative two-level
//! defect (TLS).
//!
//! The joint qubit–TLS state evolves under a Lindblad master equation where
//! only the TLS couples to a thermal bath. The crate provides the full
//! 16-coordinate propagation in the rotating and laboratory frames, the
//! closed 8-coordinate reduction, its spherical form, and the analysis of the
//! resonant (time-optimal) protocol: minimum purification times, angular
//! fixed points, correlation thresholds and the purity gain from qubit
//! coherences.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod liouville;
pub mod model;
pub mod ode;
pub mod reduced;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{DensityState, InitialStateSpec, ModelConfig, ModelParams, Populations};
pub use ode::Tolerances;
pub use trajectory::{EventKind, Trajectory};
