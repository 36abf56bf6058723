//! Library surface of the command-line runner, exposed so integration
//! tests can drive full runs in-process.

pub mod config;
pub mod error;
pub mod runner;
