//! Problem specifications, time grids and the checkable assumptions.

mod assumptions;
mod benchmark;
mod domain;
mod grid;
mod spec;

pub use assumptions::{
    validate_moment_budget, validate_stepsize, BudgetVerdict, MomentBudget, StepsizeVerdict,
    StepsizeViolation,
};
pub use benchmark::{BenchmarkId, BenchmarkProblem};
pub use domain::Domain;
pub use grid::GridSpec;
pub use spec::{
    probe_lipschitz, Constants, GeneratorFn, LipschitzProbe, ProblemBuilder, ProblemSpec,
    ScalarFn, VectorFn,
};
