use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forward::{ReferenceExit, Stepper};
use crate::problem::{GridSpec, ProblemSpec};
use crate::rng::Noise;
use crate::stats::{fit_rate, Accumulator, RateFit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    /// Compare the chains at time `t`.
    Fixed { t: f64 },
    /// Compare at the coarse exit time, or at `t_max` when censored.
    CoarseExit { t_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmVerdict {
    Fitted,
    /// All errors vanish up to rounding, as for `sigma = 0`.
    Degenerate,
    /// The error CIs of all stepsizes share a point.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmRow {
    pub h: f64,
    /// `E|X_fine - X_bar|^p` at the horizon.
    pub error: f64,
    pub ci: f64,
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmSlopeReport {
    pub p: f64,
    pub horizon: Horizon,
    pub fine_dt: f64,
    pub rows: Vec<EmRow>,
    pub verdict: EmVerdict,
    /// Log-log slope of the `p`-th moment of the error.
    pub moment_slope: Option<f64>,
    /// `moment_slope / p`, the strong order.
    pub order: Option<f64>,
    pub fit: Option<RateFit>,
}

const DEGENERATE_SCALE: f64 = 1e-10;

/// Strong error of the Euler–Maruyama chain against a fine chain with step
/// `min(h) / refine`, driven by the same Brownian path for every `h`.
pub fn em_strong_error_slope(
    p: &ProblemSpec,
    hs: &[f64],
    horizon: Horizon,
    refine: usize,
    n_paths: usize,
    seed: u64,
    moment: f64,
) -> Result<EmSlopeReport> {
    p.validate()?;
    if hs.len() < 3 {
        return invalid("need at least 3 stepsizes");
    }
    if refine < 2 || n_paths < 2 || !(moment > 0.0) {
        return invalid("need refine >= 2, at least 2 paths and a positive moment");
    }
    let h_min = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let fine_dt = h_min / refine as f64;
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let t_end = match horizon {
            Horizon::Fixed { t } => t,
            Horizon::CoarseExit { t_max } => t_max,
        };
        let grid = GridSpec::new(h, t_end)?;
        let k = (h / fine_dt).round() as usize;
        if ((k as f64) * fine_dt - h).abs() > 1e-9 * h {
            return invalid(format!("h = {h} is not a multiple of the fine step {fine_dt}"));
        }
        let n_max = grid.nodes();
        let stopped = matches!(horizon, Horizon::CoarseExit { .. });
        let errs: Vec<(f64, bool)> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut st = Stepper::new(p, h, k, seed, i as u64, Noise::Gaussian, ReferenceExit::Grid);
                let mut exited = false;
                while st.node < n_max {
                    st.step();
                    if stopped && !p.domain.contains(&st.coarse) {
                        exited = true;
                        break;
                    }
                }
                let e2: f64 = st.coarse.iter().zip(&st.fine).map(|(a, b)| (a - b).powi(2)).sum();
                (e2.powf(0.5 * moment), stopped && !exited)
            })
            .collect();
        let mut acc = Accumulator::default();
        let mut censored = 0;
        for (e, c) in errs {
            acc.push(e);
            censored += c as usize;
        }
        let m = acc.finish();
        rows.push(EmRow { h, error: m.mean, ci: m.ci, censored });
    }
    let mut report =
        EmSlopeReport { p: moment, horizon, fine_dt, rows, verdict: EmVerdict::Fitted, moment_slope: None, order: None, fit: None };
    // Coupled chains that agree up to rounding, as under additive noise.
    let floor = DEGENERATE_SCALE.powf(moment);
    if report.rows.iter().all(|r| r.error <= floor) {
        report.verdict = EmVerdict::Degenerate;
        return Ok(report);
    }
    let lo = report.rows.iter().map(|r| r.error - r.ci).fold(f64::MIN, f64::max);
    let hi = report.rows.iter().map(|r| r.error + r.ci).fold(f64::MAX, f64::min);
    if lo <= hi {
        report.verdict = EmVerdict::Inconclusive;
    }
    let pts: Vec<(f64, f64, f64)> = report.rows.iter().map(|r| (r.h, r.error, r.ci)).collect();
    if let Ok(fit) = fit_rate(&pts) {
        report.moment_slope = Some(fit.slope);
        report.order = Some(fit.slope / moment);
        report.fit = Some(fit);
    }
    Ok(report)
}
