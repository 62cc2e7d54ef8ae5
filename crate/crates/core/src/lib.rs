//! Causal rate distortion functions for finite-alphabet Markov sources.
//!
//! * [`prob`]: distributions, kernels, entropies and Markov steady states.
//! * [`solver`]: backward potentials, tilted kernels and the marginal fixed
//!   point, in exact (finite horizon) and stationary (per-letter) modes.
//! * [`oracle`]: brute-force minimisation used to cross-check the solver.
//! * [`causality`]: conditional-independence checks on sequence kernels.
//! * [`analytic`]: closed forms for the binary consecutive-ones example.
//! * [`realization`]: encoder/channel/decoder cascades, simulation and
//!   filtering.
//! * [`config`]: TOML model and distortion files.

pub mod analytic;
pub mod causality;
pub mod config;
pub mod distortion;
pub mod error;
pub mod history;
pub mod oracle;
pub mod prob;
pub mod realization;
pub mod solver;

pub use distortion::DistortionSpec;
pub use error::{Error, Result};
pub use prob::{Distribution, MarkovSource, StochasticKernel};
pub use solver::{CausalPolicy, RdPoint, SolverConfig, SolverMode};
