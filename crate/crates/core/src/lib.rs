//! Numerical laboratory for deep Gaussian process priors in nonlinear
//! PDE-constrained inverse problems.
//!
//! The crate builds up from tensor grids and series bases to elliptic forward
//! solvers, conditioned Gaussian series samplers, compositional (deep) priors
//! with a penalized structure hyperprior, function-space MCMC, and contraction
//! experiments with exact rate-exponent bookkeeping.

pub mod basis;
pub mod cutoff;
pub mod data;
pub mod dgp;
pub mod elementary;
pub mod error;
pub mod experiment;
pub mod exponents;
pub mod grid;
pub mod info;
pub mod io;
pub mod mcmc;
pub mod norms;
pub mod pde;
pub mod report;
pub mod rng;
pub mod structure;
pub mod truth;
pub mod wavelet;

pub use error::{Error, Result};
