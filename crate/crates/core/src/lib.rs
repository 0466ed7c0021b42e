//! Two-species quorum-sensing model: stochastic simulation and information-theoretic analysis.

pub mod error;
pub mod freq;
pub mod info;
pub mod knn;
pub mod model;
pub mod sde;
pub mod sensitivity;

pub use error::{Error, Result};
