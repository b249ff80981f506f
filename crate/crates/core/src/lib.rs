//! Forward Euler–Maruyama paths, backward Euler solvers and exit-time
//! diagnostics for BSDEs whose terminal time is the exit time of a diffusion
//! from a domain.
//!
//! The crate is split along the pipeline:
//!
//! - [`problem`]: problem specs, grids, checkable assumptions, benchmark catalog
//! - [`forward`]: coupled coarse/fine Euler paths and exit-time detection
//! - [`backward`]: quadrature backward induction and the regression Picard solver
//! - [`moments`]: exponential and polynomial exit-time moment checks
//! - [`theory`]: Monte Carlo and exact checks of the supporting inequalities
//! - [`harness`]: experiment configs, rate fitting and the output layout

pub mod backward;
pub mod error;
pub mod forward;
pub mod harness;
pub mod moments;
pub mod problem;
pub mod rng;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
