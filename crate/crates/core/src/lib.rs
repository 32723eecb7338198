//! Monte Carlo integration on `[-1, 1]^d` with projection determinantal point
//! processes built from multivariate orthonormal Jacobi polynomials.

pub mod basis;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod integrands;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
