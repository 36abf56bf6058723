//! Convergence diagnostics for adaptive Markov chains on finite state
//! spaces.
//!
//! The library has four layers:
//!
//! - [`markov`] — exact kernel algebra: distributions, row-stochastic
//!   matrices, total variation, and frozen-kernel convergence times.
//! - [`adaptation`] — adaptive processes `(X_n, θ_n)`: policies, seeded
//!   simulation, exact and Monte Carlo marginals, and the adaptive
//!   convergence time at visited pairs.
//! - [`diagnostics`] — the estimators built on top: diminishing-adaptation
//!   series, containment tail matrices, windowed tail suprema, paired
//!   comparison probes, and a telescoping product-vs-power bound verifier.
//! - [`scenarios`] — built-in, fully specified experiment configurations.
//!
//! Everything is deterministic given a base seed; replicate randomness is
//! split into named ChaCha streams so results do not depend on worker
//! count.

#![forbid(unsafe_code)]

pub mod adaptation;
pub mod diagnostics;
pub mod error;
pub mod markov;
pub mod scenarios;

pub use error::{Error, Result};
