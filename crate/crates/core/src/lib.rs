//! Pressure-robust hybridizable discontinuous Galerkin discretization of the
//! Stokes problem in two dimensions, with static condensation to trace
//! unknowns and block-preconditioned MINRES.

pub mod assembly;
pub mod condensation;
pub mod direct;
pub mod error;
pub mod fespace;
pub mod krylov;
pub mod mesh;
pub mod postprocess;
pub mod problem;
pub mod sparse;
pub mod spectral;
pub mod studies;

pub use error::{Error, Result};
