//! Numerical analysis of the smallest chemical reaction system with a Hopf
//! bifurcation, in the scaled form
//!
//! ```text
//! x' = k x - x y,   y' = k3 (z - y),   z' = k5 (x - z)
//! ```
//!
//! on the nonnegative octant. The crate covers regime classification,
//! linear stability, adaptive integration with events and variational
//! equations, the global attractor bound and positively invariant boxes,
//! uniform persistence, the invariant manifolds of `0` and `E = k (1, 1, 1)`,
//! periodic orbits with Floquet multipliers, and the compound-matrix
//! Bendixson certificate excluding periodic orbits below the Hopf threshold.

// `!(a > b)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bendixson;
pub mod error;
pub mod global;
pub mod integrate;
pub mod model;
pub mod orbits;
pub mod report;
pub mod sampling;
pub mod spectral;

pub use error::{Error, IntegrationError, Result};
pub use integrate::{Direction, EventSpec, IntegratorConfig, Trajectory};
pub use model::{Component, Mat3, OriginalParams, Params, Regime, State};
pub use orbits::PeriodicOrbit;
pub use report::VerificationReport;
pub use spectral::{Spectrum, Stability};
