//! Simulation and analysis of phonon-number distributions for a single
//! trapped-ion mechanical oscillator driven by repeated anti-Jaynes-Cummings
//! pulses.
//!
//! The crate is organized around one state object, [`PhononDistribution`]: a
//! truncated probability vector over Fock states. Every state handled here is
//! diagonal in the Fock basis (phases are randomized by the protocol), so
//! populations are the whole story.
//!
//! Modules:
//! - [`fock`]: construction and information-theoretic characterization of
//!   distributions (thermal, Poisson, entropies).
//! - [`dynamics`]: one accumulation step, ideal and with contrast loss and
//!   reset-induced heating, plus its k-fold iteration.
//! - [`asymptotics`]: closed-form fixed points and the k -> infinity mixture.
//! - [`metrics`]: nonclassicality and quantum non-Gaussianity certification
//!   (Fano, Klyshko, Wigner, Gaussian-envelope witnesses, entanglement
//!   potential).
//! - [`tomography`]: blue-sideband Rabi signal synthesis, projection noise,
//!   and constrained least-squares inversion with Monte-Carlo uncertainties.
//! - [`io`]: CSV/JSON serialization for all of the above.
//!
//! With the default `parallel` feature the hot paths (witness envelope
//! construction, Monte-Carlo refits, batch metrics) fan out over rayon;
//! `*_seq` siblings always run sequentially and produce identical results.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too;
// the positive comparison would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod io;
pub mod math;
pub mod metrics;
pub mod tomography;

pub(crate) mod parallel;

pub use error::SimError;
pub use fock::{PhononDistribution, TruncationMode, TruncationPolicy};
pub use dynamics::{IterationTrace, StepParams};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
