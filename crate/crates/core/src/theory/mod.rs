//! Executable checks of the supporting estimates: pathwise discrete
//! Gronwall on finite chains, Kolmogorov increment ratios, strong
//! Euler–Maruyama rates and the two-stopping-time gap inequality.

mod euler;
mod gronwall;
mod kolmogorov;
mod stopping;

pub use euler::{em_strong_error_slope, EmRow, EmSlopeReport, EmVerdict, Horizon};
pub use gronwall::{
    discrete_gronwall_verify, gronwall_batch, random_chain, ChainParams, FiniteChain, GronwallBatch, GronwallReport,
    GronwallSum, GronwallVerdict, Witness,
};
pub use kolmogorov::{dyadic_lags, kolmogorov_ratio_fit, KolmogorovFit, SampledPaths};
pub use stopping::{
    brownian_shift_family, euler_exit_family, two_stopping_gap_check, GapMember, GapReport, GapRow, GapVerdict,
    GAP_SLOPE_SLACK,
};
