//! Numerical toolkit for the Laplacian on a thin layer with imaginary
//! Robin-type boundary coupling and its effective Hamiltonian on the
//! mid-hyperplane.
//!
//! The crate assembles the layer operator from its sesquilinear form on a
//! truncated tensor grid, solves the associated non-Hermitian pencils, and
//! quantifies how fast the layer resolvent approaches the effective
//! resolvent as the layer width shrinks.

pub mod assembly;
pub mod config;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod report;
pub mod resolvent;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
