//! Simulation and inference for interaction-free detection of an absorbing
//! object via Zeno suppression of two-mode pair creation.
//!
//! The library is organized in four layers:
//!
//! - [`fockspace`] — truncated two-mode Fock basis: mode operators, squeezed
//!   vacuum construction, density matrices, expectation values.
//! - [`dynamics`] — time evolution under the pair-creation Hamiltonian with
//!   one-mode loss: the full Lindblad master equation, its exact closed
//!   moment system, and fast propagators exploiting conserved structure.
//! - [`homodyne`] — counting statistics of displaced Fock states and
//!   mixtures, detection-noise convolution, raw-count rescaling, and Monte
//!   Carlo shot synthesis.
//! - [`inference`] — maximum-likelihood weight reconstruction with bootstrap
//!   intervals, Bayesian presence/absence posteriors, threshold
//!   discrimination, and the interaction-free figure of merit.
//!
//! All stochastic operations are deterministic for a fixed seed; random
//! streams are derived from `(seed, task index)` so parallel execution does
//! not change results.

pub mod dynamics;
pub mod fockspace;
pub mod homodyne;
pub mod inference;
pub mod quad;

mod error;
pub mod streams;

pub use error::{Error, Result};
