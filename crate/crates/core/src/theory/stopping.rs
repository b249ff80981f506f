use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forward::{ReferenceExit, Stepper};
use crate::problem::{GridSpec, ProblemSpec};
use crate::rng::{Noise, PathRng};
use crate::stats::{ols_slope, Accumulator};

/// Per-path samples for one pair-generating rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapMember {
    pub label: String,
    /// `sup_s |P_{s ∧ tau1} - P_{s ∧ tau2}|^p`.
    pub sup_terms: Vec<f64>,
    /// `|tau1 - tau2|`.
    pub gaps: Vec<f64>,
    pub censored: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVerdict {
    Bounded,
    Unbounded,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub label: String,
    pub lhs: f64,
    pub lhs_ci: f64,
    /// `E[|tau1 - tau2|^{2p(alpha - eps)}]^{1/2}`.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub p: f64,
    pub alpha: f64,
    pub eps: f64,
    pub rows: Vec<GapRow>,
    /// Slope of `log lhs` against `log rhs`; the constant stays unknown.
    pub slope: Option<f64>,
    pub verdict: GapVerdict,
}

/// Default tolerance on the log-log slope: a ratio that stays bounded as
/// the gaps shrink needs slope at least 1.
pub const GAP_SLOPE_SLACK: f64 = 0.15;

pub fn two_stopping_gap_check(members: &[GapMember], p: f64, alpha: f64, eps: f64, slack: f64) -> Result<GapReport> {
    if !(p >= 1.0) || !(alpha > 0.0) || !(eps >= 0.0) || eps >= alpha {
        return invalid(format!("need p >= 1 and 0 <= eps < alpha, got p={p}, alpha={alpha}, eps={eps}"));
    }
    let q = 2.0 * p * (alpha - eps);
    let mut rows = Vec::new();
    for m in members {
        if m.sup_terms.len() != m.gaps.len() || m.gaps.is_empty() {
            return invalid(format!("member {} has mismatched or empty samples", m.label));
        }
        let mut l = Accumulator::default();
        let mut r = Accumulator::default();
        for (s, g) in m.sup_terms.iter().zip(&m.gaps) {
            l.push(*s);
            r.push(g.powf(q));
        }
        let (l, r) = (l.finish(), r.finish());
        let rhs = r.mean.sqrt();
        rows.push(GapRow { label: m.label.clone(), lhs: l.mean, lhs_ci: l.ci, rhs, ratio: l.mean / rhs });
    }
    let live: Vec<&GapRow> = rows.iter().filter(|r| r.rhs > 0.0).collect();
    if live.is_empty() {
        return Ok(GapReport { p, alpha, eps, rows, slope: None, verdict: GapVerdict::Degenerate });
    }
    if live.len() < 2 || live.iter().any(|r| !(r.lhs > 0.0)) {
        return invalid("need at least two rules with positive gaps and positive left-hand sides");
    }
    let xs: Vec<f64> = live.iter().map(|r| r.rhs.ln()).collect();
    let ys: Vec<f64> = live.iter().map(|r| r.lhs.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    let verdict = if slope >= 1.0 - slack { GapVerdict::Bounded } else { GapVerdict::Unbounded };
    Ok(GapReport { p, alpha, eps, rows, slope: Some(slope), verdict })
}

/// Brownian motion in 1D with `tau1` its first `dt`-grid exit from
/// `(-1, 1)` and `tau2 = tau1 + delta` for each `delta` (multiples of `dt`).
/// Paths that have not exited by `t_max` are censored.
pub fn brownian_shift_family(deltas: &[f64], dt: f64, t_max: f64, n_paths: usize, seed: u64, p: f64) -> Result<Vec<GapMember>> {
    if deltas.is_empty() || !(dt > 0.0) || n_paths == 0 {
        return invalid("shift family needs deltas, dt > 0 and paths");
    }
    let lags: Vec<usize> = deltas.iter().map(|d| (d / dt).round() as usize).collect();
    if lags.iter().zip(deltas).any(|(l, d)| *l == 0 || ((*l as f64) * dt - d).abs() > 1e-9 * d) {
        return invalid("shifts must be positive multiples of dt");
    }
    let max_lag = *lags.iter().max().unwrap();
    let n_max = (t_max / dt).ceil() as usize;
    let sq = dt.sqrt();
    let per_path: Vec<Option<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::new(seed, i as u64, Noise::Gaussian);
            let mut w = 0.0f64;
            let mut n = 0;
            while w.abs() < 1.0 {
                if n >= n_max {
                    return None;
                }
                w += sq * rng.normal();
                n += 1;
            }
            let anchor = w;
            let mut sup = 0.0f64;
            let mut out = vec![0.0; lags.len()];
            for k in 1..=max_lag {
                w += sq * rng.normal();
                sup = sup.max((w - anchor).abs());
                for (o, &l) in out.iter_mut().zip(&lags) {
                    if l == k {
                        *o = sup.powf(p);
                    }
                }
            }
            Some(out)
        })
        .collect();
    let censored = per_path.iter().filter(|v| v.is_none()).count();
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let sup_terms: Vec<f64> = per_path.iter().flatten().map(|v| v[j]).collect();
            GapMember { label: format!("shift {d}"), gaps: vec![d; sup_terms.len()], sup_terms, censored }
        })
        .collect())
}

/// Continuous Euler–Maruyama interpolation `P` of step `h`, with `tau1`
/// the exit of the fine chain (step `h / refine`) and `tau2` the coarse
/// grid exit. The sup runs over the fine grid between the two times.
pub fn euler_exit_family(
    problem: &ProblemSpec,
    hs: &[f64],
    refine: usize,
    t_max: f64,
    n_paths: usize,
    seed: u64,
    p: f64,
) -> Result<Vec<GapMember>> {
    problem.validate()?;
    if refine < 2 || n_paths == 0 {
        return invalid("exit family needs refine >= 2 and paths");
    }
    let mut out = Vec::with_capacity(hs.len());
    for &h in hs {
        let grid = GridSpec::covering(h, t_max)?;
        let n_max = grid.nodes();
        let samples: Vec<Option<(f64, f64)>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut st = Stepper::new(problem, h, refine, seed, i as u64, Noise::Gaussian, ReferenceExit::Grid)
                    .with_interpolation();
                let mut anchor: Option<Vec<f64>> = None;
                let mut t1 = None;
                let mut t2 = None;
                let mut sup = 0.0f64;
                while st.node < n_max && (t1.is_none() || t2.is_none()) {
                    st.step_with(|v| {
                        if t1.is_some() && t2.is_some() {
                            return;
                        }
                        if let Some(a) = &anchor {
                            let n2: f64 = v.interp.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum();
                            sup = sup.max(n2.sqrt());
                        }
                        if t1.is_none() && v.exit.is_some() {
                            t1 = Some(v.t);
                            if anchor.is_none() {
                                anchor = Some(v.interp.to_vec());
                            }
                        }
                    });
                    if t2.is_none() && !problem.domain.contains(&st.coarse) {
                        t2 = Some(st.time());
                        if anchor.is_none() {
                            anchor = Some(st.coarse.clone());
                        }
                    }
                }
                match (t1, t2) {
                    (Some(a), Some(b)) => Some((sup.powf(p), (a - b).abs())),
                    _ => None,
                }
            })
            .collect();
        let censored = samples.iter().filter(|s| s.is_none()).count();
        let (sup_terms, gaps): (Vec<f64>, Vec<f64>) = samples.into_iter().flatten().unzip();
        out.push(GapMember { label: format!("h {h}"), sup_terms, gaps, censored });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_are_degenerate() {
        let m = GapMember { label: "same".into(), sup_terms: vec![0.0; 10], gaps: vec![0.0; 10], censored: 0 };
        let r = two_stopping_gap_check(&[m], 2.0, 0.5, 0.05, GAP_SLOPE_SLACK).unwrap();
        assert_eq!(r.verdict, GapVerdict::Degenerate);
        assert_eq!(r.rows[0].lhs, 0.0);
    }

    #[test]
    fn power_law_members_are_bounded() {
        let members: Vec<GapMember> = [0.01, 0.04, 0.16]
            .iter()
            .map(|&d: &f64| GapMember { label: format!("{d}"), sup_terms: vec![d.sqrt(); 4], gaps: vec![d; 4], censored: 0 })
            .collect();
        // lhs = d^{1/2}, rhs = d^{p(alpha-eps)} = d^{0.45}: slope 1/0.9.
        let r = two_stopping_gap_check(&members, 1.0, 0.5, 0.05, GAP_SLOPE_SLACK).unwrap();
        assert_eq!(r.verdict, GapVerdict::Bounded);
        assert!((r.slope.unwrap() - 1.0 / 0.9).abs() < 1e-9);
    }
}
