use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform grid `{n h : 0 <= n <= t_max / h}`; `t_max` is the censoring
/// horizon of simulations and must be a whole number of steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub t_max: f64,
}

impl GridSpec {
    pub fn new(h: f64, t_max: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return invalid(format!("stepsize must be positive, got {h}"));
        }
        if !(t_max >= h) || !t_max.is_finite() {
            return invalid(format!("t_max={t_max} must be finite and at least h={h}"));
        }
        let n = t_max / h;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return invalid(format!("t_max={t_max} is not a multiple of h={h}"));
        }
        Ok(Self { h, t_max })
    }

    /// Smallest grid of step `h` reaching at least `t`.
    pub fn covering(h: f64, t: f64) -> Result<Self> {
        let n = (t / h - 1e-9).ceil().max(1.0);
        Self::new(h, n * h)
    }

    pub fn nodes(&self) -> usize {
        (self.t_max / self.h).round() as usize
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.h
    }

    /// Weight `(1 - 3 L_f h)^(-n)` of node `n` in the weighted sequence norm.
    pub fn weight(&self, n: usize, l_f: f64) -> f64 {
        (1.0 - 3.0 * l_f * self.h).powf(-(n as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0.0, 1.0).is_err());
        assert!(GridSpec::new(-0.1, 1.0).is_err());
        assert!(GridSpec::new(0.3, 1.0).is_err());
        assert!(GridSpec::new(0.5, 0.25).is_err());
    }

    #[test]
    fn weight_at_first_node() {
        let g = GridSpec::new(0.1, 1.0).unwrap();
        assert!((g.weight(1, 0.1) - 1.0 / 0.97).abs() < 1e-12);
        assert_eq!(g.nodes(), 10);
    }
}
