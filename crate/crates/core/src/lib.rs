//! Transformation-based MCMC.
//!
//! Additive and general TMCMC kernels, random-walk Metropolis and HMC
//! baselines, discrete-state kernels with exact transition matrices, chain
//! diagnostics, acceptance-rate bound evaluators and a verification harness.

pub mod baseline;
pub mod chain;
pub mod challenger;
pub mod diagnostics;
pub mod discrete;
pub mod error;
pub mod normal;
pub mod report;
pub mod rng;
pub mod targets;
pub mod tmcmc;
pub mod transform;
pub mod verify;

pub use chain::{run_chain, run_chains, ChainState, Execution, Kernel, Record, RunOptions, StepInfo, Trace};
pub use error::{Error, Result};
pub use targets::Target;
