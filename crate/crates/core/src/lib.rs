//! Kernels, spectral machinery and series solvers for the Rayleigh–Stokes problem
//! with a Caputo fractional time derivative.

pub mod convergence;
pub mod error;
pub mod kernel;
pub mod manifest;
pub mod oracle;
pub mod quadrature;
pub mod solvers;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
