//! Singular quadrature over pairs of time intervals and the variance bounds
//! that control it.

pub mod bounds;
pub mod cases;
pub mod gauss;
pub mod lab;
pub mod simplex;

use serde::{Deserialize, Serialize};

pub use bounds::{
    bound_ratio, case_bound_chain_check, falsify_bound_ii, local_nondeterminism_check, scan_bound_ratio,
    BoundScan, ChainReport,
};
pub use cases::{lab_integrand, CaseGeometry, CaseId};
pub use lab::{chaos_norm_integral, chaos_norm_integral_with, second_moment_integral, NormIntegral, NormOptions};

/// Value of a quadrature with its error estimate and cell count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub cells: usize,
    pub converged: bool,
}
