//! Exit-time moments: analytic exponential thresholds, batch scans of
//! `E[exp(m tau)]`, the cut-off Freidlin bound and power moments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::forward::{detect_cutoff_exit, reference_exit_times, ExitSamples, PathBundle};
use crate::problem::Domain;
use crate::stats::Accumulator;

/// `1/2 (pi / (a + b))^2`: `E[exp(m tau)] < inf` iff `m` is below this, for
/// Brownian motion started at 0 in `(-a, b)`.
pub fn one_d_threshold(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return invalid(format!("interval half-widths must be positive, got a={a}, b={b}"));
    }
    Ok(0.5 * (PI / (a + b)).powi(2))
}

/// `d / (8 D^2)`, the rate for which the cut-off exit time of the sup-norm
/// ball `B(D)` has a finite exponential moment.
pub fn ball_cutoff_threshold(d: usize, radius: f64) -> Result<f64> {
    if d == 0 || !(radius > 0.0) {
        return invalid(format!("need d >= 1 and D > 0, got d={d}, D={radius}"));
    }
    Ok(d as f64 / (8.0 * radius * radius))
}

/// Freidlin bound `p! (8 D^2 / d)^p`.
pub fn freidlin_bound(d: usize, radius: f64, p: u32) -> Result<f64> {
    let m = ball_cutoff_threshold(d, radius)?;
    Ok(factorial(p) / m.powi(p as i32))
}

fn factorial(p: u32) -> f64 {
    (1..=p).map(f64::from).product()
}

/// `E[tau^p] <= p! M / m^p` whenever `E[exp(m tau)] <= M`.
pub fn power_from_exp(m_bound: f64, m: f64, p: u32) -> Result<f64> {
    if !(m_bound > 0.0) || !(m > 0.0) {
        return invalid(format!("need M > 0 and m > 0, got M={m_bound}, m={m}"));
    }
    Ok(factorial(p) * m_bound / m.powi(p as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVerdict {
    Stable,
    Diverging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub m: f64,
    /// `(sample size, running estimate)` at each batch boundary.
    pub estimates: Vec<(usize, f64)>,
    pub verdict: ScanVerdict,
    /// Share of the final estimate contributed by censored samples.
    pub censor_mass: f64,
}

/// Batch boundaries `10^3, 10^3.5, ..., 10^5`, capped at `n` and always
/// ending at `n`.
pub fn geometric_batches(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=4)
        .map(|k| 10f64.powf(3.0 + 0.5 * k as f64).round() as usize)
        .filter(|&b| b < n)
        .collect();
    out.push(n);
    out
}

/// Running estimates of `E[exp(m tau)]` at the batch boundaries.
///
/// Stable: the last three estimates lie within 10% of each other.
/// Diverging: the estimates increase at every batch and grow more than 3x
/// overall. Censored samples count as `exp(m t_max)`; when they carry more
/// than 0.1% of the final estimate a stable verdict becomes inconclusive.
pub fn exp_moment_scan(samples: &ExitSamples, m_values: &[f64], batches: &[usize]) -> Result<Vec<ScanRow>> {
    if batches.is_empty() || batches.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("batch boundaries must be strictly increasing");
    }
    if samples.len() < 10_000 {
        return invalid(format!("need at least 10^4 samples, got {}", samples.len()));
    }
    if samples.times.iter().all(|t| t.is_none()) {
        return Err(Error::Numerical("every exit time is censored".into()));
    }
    if *batches.last().unwrap() > samples.len() {
        return invalid(format!("last batch {} exceeds the {} samples", batches.last().unwrap(), samples.len()));
    }
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        if !(m >= 0.0) {
            return invalid(format!("exponent must be nonnegative, got {m}"));
        }
        let cens = (m * samples.t_max).exp();
        let mut sum = 0.0;
        let mut censored = 0.0;
        let mut estimates = Vec::with_capacity(batches.len());
        let mut k = 0;
        for &end in batches {
            while k < end {
                match samples.times[k] {
                    Some(t) => sum += (m * t).exp(),
                    None => {
                        sum += cens;
                        censored += cens;
                    }
                }
                k += 1;
            }
            estimates.push((end, sum / end as f64));
        }
        let censor_mass = if sum > 0.0 { censored / sum } else { 0.0 };
        let vals: Vec<f64> = estimates.iter().map(|e| e.1).collect();
        let mut verdict = ScanVerdict::Inconclusive;
        if vals.len() >= 3 {
            let tail = &vals[vals.len() - 3..];
            let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
            let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
            if hi / lo - 1.0 < 0.10 {
                verdict = ScanVerdict::Stable;
            } else if vals.windows(2).all(|w| w[1] > w[0]) && vals[vals.len() - 1] > 3.0 * vals[0] {
                verdict = ScanVerdict::Diverging;
            }
        }
        if verdict == ScanVerdict::Stable && censor_mass > 1e-3 {
            verdict = ScanVerdict::Inconclusive;
        }
        rows.push(ScanRow { m, estimates, verdict, censor_mass });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreidlinRow {
    pub p: u32,
    pub estimate: f64,
    pub ci: f64,
    pub bound: f64,
    pub verdict: CheckVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreidlinReport {
    pub d: usize,
    pub radius: f64,
    pub alpha: f64,
    pub h: f64,
    pub censored_fraction: f64,
    pub rows: Vec<FreidlinRow>,
}

/// Estimates `E[((tau_cut ∨ tau) - tau)^p]` from paired samples of the
/// reference exit `tau` of `B(D)` and the grid exit `tau_cut` of the
/// shrunken ball, against `p! (8 D^2 / d)^p`. More than 1% censored pairs
/// makes every row inconclusive.
pub fn freidlin_check(
    d: usize,
    radius: f64,
    alpha: f64,
    h: f64,
    reference: &ExitSamples,
    cutoff: &ExitSamples,
    powers: &[u32],
) -> Result<FreidlinReport> {
    if reference.len() != cutoff.len() || reference.is_empty() {
        return invalid("reference and cut-off samples must pair up");
    }
    let pairs: Vec<f64> = reference
        .times
        .iter()
        .zip(&cutoff.times)
        .filter_map(|(t, c)| match (t, c) {
            (Some(t), Some(c)) => Some((c.max(*t) - t).max(0.0)),
            _ => None,
        })
        .collect();
    let censored_fraction = 1.0 - pairs.len() as f64 / reference.len() as f64;
    let mut rows = Vec::new();
    for &p in powers {
        let bound = freidlin_bound(d, radius, p)?;
        let mut acc = Accumulator::default();
        for g in &pairs {
            acc.push(g.powi(p as i32));
        }
        let m = acc.finish();
        let verdict = if censored_fraction > 0.01 || m.n == 0 {
            CheckVerdict::Inconclusive
        } else if m.mean + m.ci <= bound {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        };
        rows.push(FreidlinRow { p, estimate: m.mean, ci: m.ci, bound, verdict });
    }
    Ok(FreidlinReport { d, radius, alpha, h, censored_fraction, rows })
}

/// Freidlin check on a coupled bundle whose domain is the sup-norm ball of
/// radius `D` around the origin.
pub fn freidlin_check_bundle(b: &PathBundle, alpha: f64, powers: &[u32]) -> Result<FreidlinReport> {
    let d = b.problem.dim;
    let (lo, hi) = b.problem.domain.bounding_box();
    let radius = b.problem.domain.half_width();
    let euclid = matches!(b.problem.domain, Domain::Ball { .. }) && d > 1;
    if euclid || lo.iter().chain(&hi).any(|v| (v.abs() - radius).abs() > 1e-12) {
        return invalid("Freidlin check needs a sup-norm ball centred at the origin");
    }
    let reference = reference_exit_times(b)?;
    let cutoff = detect_cutoff_exit(b, radius, alpha)?;
    freidlin_check(d, radius, alpha, b.grid.h, &reference, &cutoff, powers)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPrimeCheck {
    pub h0: f64,
    /// `h0 < D^2 / (2 d)`.
    pub step_ok: bool,
    /// `P[|N|_inf >= h0^(alpha - 1/2)]` for a standard normal `N` in R^d.
    pub tail_probability: f64,
    /// Tail probability at most 2/5.
    pub tail_ok: bool,
}

impl HPrimeCheck {
    pub fn ok(&self) -> bool {
        self.step_ok && self.tail_ok
    }
}

pub fn check_h_prime(h0: f64, d: usize, radius: f64, alpha: f64) -> Result<HPrimeCheck> {
    if !(h0 > 0.0) || d == 0 || !(radius > 0.0) || !(0.0..0.5).contains(&alpha) {
        return invalid(format!("bad inputs h0={h0}, d={d}, D={radius}, alpha={alpha}"));
    }
    let r = h0.powf(alpha - 0.5);
    let inside_1d = 1.0 - erfc(r / std::f64::consts::SQRT_2);
    let tail_probability = 1.0 - inside_1d.powi(d as i32);
    Ok(HPrimeCheck {
        h0,
        step_ok: h0 < 0.5 * radius * radius / d as f64,
        tail_probability,
        tail_ok: tail_probability <= 0.4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thresholds() {
        assert_relative_eq!(one_d_threshold(1.0, 1.0).unwrap(), PI * PI / 8.0);
        assert_relative_eq!(one_d_threshold(0.5, 0.5).unwrap(), PI * PI / 2.0);
        assert_relative_eq!(one_d_threshold(1.0, 3.0).unwrap(), 0.30842513753404244, epsilon = 1e-12);
        assert!(one_d_threshold(0.0, 1.0).is_err());
        assert_relative_eq!(ball_cutoff_threshold(2, 1.0).unwrap(), 0.25);
        assert_relative_eq!(ball_cutoff_threshold(1, 2.0).unwrap(), 0.03125);
    }

    #[test]
    fn freidlin_bounds() {
        assert_relative_eq!(freidlin_bound(1, 1.0, 1).unwrap(), 8.0);
        assert_relative_eq!(freidlin_bound(1, 1.0, 2).unwrap(), 128.0);
        assert_relative_eq!(freidlin_bound(1, 1.0, 3).unwrap(), 3072.0);
    }

    #[test]
    fn power_moments() {
        let e = std::f64::consts::E;
        assert_relative_eq!(power_from_exp(e, 1.0, 1).unwrap(), e);
        assert_relative_eq!(power_from_exp(2.0, 0.5, 2).unwrap(), 16.0);
    }

    #[test]
    fn h_prime_example() {
        let c = check_h_prime(0.04, 1, 1.0, 0.25).unwrap();
        assert!(c.ok());
        assert_relative_eq!(c.tail_probability, erfc(0.04f64.powf(-0.25) / 2f64.sqrt()), epsilon = 1e-15);
        assert!(!check_h_prime(0.6, 1, 1.0, 0.25).unwrap().step_ok);
    }

    #[test]
    fn scan_verdicts_on_synthetic_samples() {
        let n = 100_000;
        let det = ExitSamples { times: vec![Some(1.0); n], t_max: 10.0 };
        let rows = exp_moment_scan(&det, &[2.0], &geometric_batches(n)).unwrap();
        assert_eq!(rows[0].verdict, ScanVerdict::Stable);
        assert_relative_eq!(rows[0].estimates.last().unwrap().1, 2f64.exp(), max_relative = 1e-9);
        let mut cens = det.clone();
        for t in cens.times.iter_mut().take(50) {
            *t = None;
        }
        let rows = exp_moment_scan(&cens, &[2.0], &geometric_batches(n)).unwrap();
        assert_eq!(rows[0].verdict, ScanVerdict::Inconclusive);
    }

    #[test]
    fn scan_rejects_bad_input() {
        let s = ExitSamples { times: vec![Some(1.0); 20_000], t_max: 10.0 };
        assert!(exp_moment_scan(&s, &[1.0], &[5000, 3000]).is_err());
        assert!(exp_moment_scan(&s, &[1.0], &[30_000]).is_err());
        let small = ExitSamples { times: vec![Some(1.0); 10], t_max: 10.0 };
        assert!(exp_moment_scan(&small, &[1.0], &[10]).is_err());
        let cens = ExitSamples { times: vec![None; 20_000], t_max: 10.0 };
        assert!(matches!(exp_moment_scan(&cens, &[1.0], &[20_000]), Err(Error::Numerical(_))));
    }
}
