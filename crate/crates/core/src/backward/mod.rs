//! Backward solvers for the implicit scheme: quadrature backward induction
//! on a mesh, and Picard iteration of the solution operator on simulated
//! paths with regression conditional expectations.

mod errors;
mod implicit;
mod induction;
mod mesh;
mod picard;
mod quadrature;
mod regression;
mod truncation;

pub use errors::{error_functionals, ErrorReport};
pub use implicit::{implicit_node_solve, iteration_bound, ImplicitSolve};
pub use induction::{backward_induction, MajorantCheck, QuadratureOptions, ValueSlices};
pub use mesh::TensorMesh;
pub use picard::{
    norm_tail_slack, picard_operator_apply, solve_picard, weighted_seq_norm, BoundSequence, PathSequence,
    PicardIteration, PicardOptions, PicardSolution,
};
pub use quadrature::{gauss_hermite, tensor_rule};
pub use regression::{HatBasis, Projection};
pub use truncation::{fallback_horizon, truncation_horizon, TruncationHorizon};

/// A discrete solution `Y_hat` that can be read along a path before its
/// exit.
pub trait DiscreteSolution: Sync {
    fn value(&self, path: usize, node: usize, x: &[f64]) -> f64;
}
