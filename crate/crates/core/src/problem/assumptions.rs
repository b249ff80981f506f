use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepsizeViolation {
    /// `h >= L_f` is the binding branch.
    AtLeastLf,
    /// `h >= 1/(12 L_f)` is the binding branch.
    AtLeastInverseTwelveLf,
}

impl fmt::Display for StepsizeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepsizeViolation::AtLeastLf => write!(f, "h ≥ L_f"),
            StepsizeViolation::AtLeastInverseTwelveLf => write!(f, "h ≥ 1/(12 L_f)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepsizeVerdict {
    pub h: f64,
    pub l_f: f64,
    /// `min{L_f, 1/(12 L_f)}`.
    pub bound: f64,
    pub violation: Option<StepsizeViolation>,
}

impl StepsizeVerdict {
    pub fn ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks `h < min{L_f, 1/(12 L_f)}`. When violated, the smaller of the two
/// bounds is the one reported.
pub fn validate_stepsize(h: f64, l_f: f64) -> Result<StepsizeVerdict> {
    if !(h > 0.0) || !(l_f > 0.0) || !h.is_finite() || !l_f.is_finite() {
        return invalid(format!("stepsize check needs h > 0 and L_f > 0, got h={h}, L_f={l_f}"));
    }
    let inv = 1.0 / (12.0 * l_f);
    let bound = l_f.min(inv);
    let violation = if h < bound {
        None
    } else if l_f <= inv {
        Some(StepsizeViolation::AtLeastLf)
    } else {
        Some(StepsizeViolation::AtLeastInverseTwelveLf)
    };
    Ok(StepsizeVerdict { h, l_f, bound, violation })
}

/// Inputs of the moment-budget condition
/// `rho > max{q1 d (6 L_mu + 3 q1 L_sigma^2), 4 q2 L_f}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBudget {
    pub d: usize,
    pub l_mu: f64,
    pub l_sigma: f64,
    pub l_f: f64,
    pub q1: f64,
    pub q2: f64,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetVerdict {
    pub diffusion_threshold: f64,
    pub generator_threshold: f64,
    pub feasible: bool,
}

impl BudgetVerdict {
    pub fn threshold(&self) -> f64 {
        self.diffusion_threshold.max(self.generator_threshold)
    }
}

pub fn validate_moment_budget(b: &MomentBudget) -> Result<BudgetVerdict> {
    if b.d == 0 {
        return invalid("dimension must be positive");
    }
    if !(b.q1 >= 2.0) || !(b.q2 >= 2.0) {
        return invalid(format!("conjugate exponents must be at least 2, got q1={}, q2={}", b.q1, b.q2));
    }
    if [b.l_mu, b.l_sigma, b.l_f].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return invalid("Lipschitz constants must be finite and nonnegative");
    }
    if !(b.rho > 0.0) {
        return invalid(format!("exponential rate must be positive, got {}", b.rho));
    }
    let diffusion_threshold = b.q1 * b.d as f64 * (6.0 * b.l_mu + 3.0 * b.q1 * b.l_sigma * b.l_sigma);
    let generator_threshold = 4.0 * b.q2 * b.l_f;
    let feasible = b.rho > diffusion_threshold.max(generator_threshold);
    Ok(BudgetVerdict { diffusion_threshold, generator_threshold, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stepsize_branches() {
        assert!(validate_stepsize(0.02, 1.0).unwrap().ok());
        let v = validate_stepsize(0.1, 1.0).unwrap();
        assert_eq!(v.violation.unwrap().to_string(), "h ≥ 1/(12 L_f)");
        let v = validate_stepsize(0.05, 0.04).unwrap();
        assert_eq!(v.violation.unwrap().to_string(), "h ≥ L_f");
        assert!(validate_stepsize(0.0, 1.0).is_err());
        assert!(validate_stepsize(0.1, -1.0).is_err());
    }

    fn budget(d: usize, l_mu: f64, l_sigma: f64, l_f: f64, q1: f64, q2: f64, rho: f64) -> MomentBudget {
        MomentBudget { d, l_mu, l_sigma, l_f, q1, q2, rho }
    }

    #[test]
    fn budget_thresholds() {
        let v = validate_moment_budget(&budget(1, 0.01, 0.01, 0.01, 64.0, 8.0, 5.0)).unwrap();
        assert!(!v.feasible);
        assert_relative_eq!(v.diffusion_threshold, 5.0688, epsilon = 1e-12);
        assert_relative_eq!(v.generator_threshold, 0.32, epsilon = 1e-12);
        let v = validate_moment_budget(&budget(2, 0.5, 0.5, 1.0, 64.0, 8.0, 100.0)).unwrap();
        assert!(!v.feasible);
        assert_relative_eq!(v.diffusion_threshold, 6528.0, epsilon = 1e-9);
        let v = validate_moment_budget(&budget(1, 0.0, 0.0, 0.0, 64.0, 8.0, 0.5)).unwrap();
        assert!(v.feasible);
        assert!(validate_moment_budget(&budget(1, 0.0, 0.0, 0.0, 1.5, 8.0, 0.5)).is_err());
        assert!(validate_moment_budget(&budget(1, 0.0, 0.0, 0.0, 2.0, 2.0, 0.0)).is_err());
    }
}
