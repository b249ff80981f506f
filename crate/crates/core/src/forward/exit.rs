use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PathBundle;
use crate::error::{invalid, Error, Result};
use crate::stats::{Accumulator, MeanCi};

/// Exit times with censoring at `t_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSamples {
    pub times: Vec<Option<f64>>,
    pub t_max: f64,
}

impl ExitSamples {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.times.iter().filter(|t| t.is_none()).count() as f64 / self.times.len().max(1) as f64
    }

    /// Mean of `min(tau, t_max)`.
    pub fn truncated_mean(&self) -> MeanCi {
        let mut acc = Accumulator::default();
        for t in &self.times {
            acc.push(t.unwrap_or(self.t_max));
        }
        acc.finish()
    }
}

/// Grid exit times `n h` of the coarse chain.
pub fn detect_discrete_exit(b: &PathBundle) -> ExitSamples {
    let h = b.grid.h;
    let times = b
        .exits
        .iter()
        .zip(&b.faults)
        .map(|(e, f)| if *f { None } else { e.map(|n| n as f64 * h) })
        .collect();
    ExitSamples { times, t_max: b.grid.t_max }
}

/// Exit times of the fine reference chain.
pub fn reference_exit_times(b: &PathBundle) -> Result<ExitSamples> {
    if !b.is_coupled() {
        return invalid("bundle has no fine reference chain");
    }
    Ok(ExitSamples { times: b.fine_exits.clone(), t_max: b.grid.t_max })
}

/// First grid time `t > 0` with `|W_t|_inf >= d_cut - h^alpha`, found by
/// replaying the Brownian paths of the bundle.
pub fn detect_cutoff_exit(b: &PathBundle, d_cut: f64, alpha: f64) -> Result<ExitSamples> {
    if !(0.0..0.5).contains(&alpha) {
        return invalid(format!("cut-off exponent must lie in [0, 1/2), got {alpha}"));
    }
    let h = b.grid.h;
    let r = d_cut - h.powf(alpha);
    if !(r > 0.0) {
        return Err(Error::Config(format!("cut-off radius {d_cut} - h^{alpha} = {r} is not positive")));
    }
    let n_max = b.grid.nodes();
    let times = (0..b.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut st = b.replay(i).brownian_only();
            while st.node < n_max {
                st.step();
                if st.w.iter().any(|v| v.abs() >= r) {
                    return Some(st.node as f64 * h);
                }
            }
            None
        })
        .collect();
    Ok(ExitSamples { times, t_max: b.grid.t_max })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitGapStats {
    pub p: f64,
    pub estimate: f64,
    pub ci: f64,
    pub n_effective: usize,
    pub censor_fraction: f64,
}

/// `E|tau_ref - tau_bar|^p` over the pairs where both exits were observed.
pub fn exit_gap_moments(b: &PathBundle, p: f64) -> Result<ExitGapStats> {
    if !(p > 0.0) {
        return invalid(format!("moment order must be positive, got {p}"));
    }
    let coarse = detect_discrete_exit(b);
    let fine = reference_exit_times(b)?;
    let mut acc = Accumulator::default();
    for (c, f) in coarse.times.iter().zip(&fine.times) {
        if let (Some(c), Some(f)) = (c, f) {
            acc.push((c - f).abs().powf(p));
        }
    }
    let m = acc.finish();
    if m.n == 0 {
        return Err(Error::Numerical("every exit pair is censored".into()));
    }
    Ok(ExitGapStats {
        p,
        estimate: m.mean,
        ci: m.ci,
        n_effective: m.n,
        censor_fraction: 1.0 - m.n as f64 / b.n_paths as f64,
    })
}
