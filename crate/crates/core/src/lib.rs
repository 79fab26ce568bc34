//! Discrete Helmholtz–Hodge decompositions of tangential vector fields on
//! triangulated surfaces, and pressure-free surface Stokes and Navier–Stokes
//! solvers in the divergence-free BDM subspace.

pub mod assembly;
pub mod config;
pub mod error;
pub mod linalg;
pub mod fespace;
pub mod flow;
pub mod hodge;
pub mod mesh;
pub mod output;
pub mod quadrature;

pub use error::{Error, Result};
