//! Config-driven experiments: TOML configs, staged runs, CSV/JSON artifacts
//! with a hashed manifest, and rate tables with acceptance windows.

mod artifacts;
mod config;
mod run;

pub use crate::stats::fit_rate;
pub use artifacts::{sha256_hex, verify_report, FileEntry, Manifest, ReportCheck, SCHEMA_VERSION};
pub use config::{
    AffineBoundary, AffineGenerator, BenchmarkChoice, BudgetConfig, CheckConfig, ConstantOverrides, ExperimentConfig,
    InlineProblem, MomentConfig, ProblemRef, ResolvedProblem, SolverConfig, TruncationPolicy, ValidationSummary, Windows,
};
pub use run::{
    run_experiment, ChecksDoc, RateRow, RateTable, RunOptions, RunOutcome, SlopeFit, Stage, TheoryResults, WindowCheck,
};
