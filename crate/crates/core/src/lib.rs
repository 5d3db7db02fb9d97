//! Numerical laboratory for the derivative of self-intersection local time
//! of fractional Brownian motion.

pub mod chaos;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod estimators;
pub mod mollifier;
pub mod pathgen;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{DsltError, Result};
