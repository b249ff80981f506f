//! Euler–Maruyama paths on the grid, the coupled fine reference chain and
//! exit-time detection.

mod bundle;
mod dump;
mod exit;
mod stepper;

pub use bundle::{coupled_fine_reference, simulate_paths, NodeStore, PathBundle, SimOptions, Storage};
pub use dump::{read_bundle_dump, write_bundle_dump, write_exit_csv, BundleDump};
pub use exit::{
    detect_cutoff_exit, detect_discrete_exit, exit_gap_moments, reference_exit_times, ExitGapStats,
    ExitSamples,
};
pub use stepper::{FineView, ReferenceExit, Stepper};
