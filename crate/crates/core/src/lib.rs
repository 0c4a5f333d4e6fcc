//! Non-Markovian quantum state diffusion (NMQSD) on small open systems.
//!
//! The crate covers the whole numerical chain used to study NMQSD
//! trajectories and their measurement interpretation:
//!
//! * [`kernels`]: environmental correlation functions and sampling of the
//!   colored complex Gaussian driving process, including conditioning on a
//!   fixed past.
//! * [`models`]: open-system instances (Jaynes-Cummings, pure dephasing, and
//!   user models with a static coupling ansatz) and their memory terms.
//! * [`dynamics`]: linear and nonlinear trajectories, two-times propagators
//!   and recovery of the driving noise from a trajectory.
//! * [`reference`]: master equations and an exact few-mode total-system
//!   simulation used as independent oracles.
//! * [`ensemble`]: Monte Carlo estimators of the reduced density operator
//!   and squared-norm martingale statistics.
//! * [`compat`]: audits of the normalization and compatibility identities a
//!   time-continuous measurement scheme would have to satisfy.
//!
//! The crate is `no_std` (it needs `alloc`). The default `parallel` feature
//! pulls in `std` and rayon to spread trajectory batches across threads;
//! results are identical with and without it.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod compat;
pub mod dynamics;
pub mod ensemble;
mod error;
pub mod kernels;
pub mod linalg;
pub mod models;
mod par;
pub mod reference;

pub use error::{Error, Result};

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use linalg::{CMatrix, CVector, C64};
