//! Two-scale Fourier solvers for short-term dune dynamics on the 2-torus.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod coefficients;
pub mod config;
pub mod integrator;
pub mod limit_solver;
pub mod oracle;
pub mod reference_solver;
pub mod spectral;

pub use error::{Error, Result};
