use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forward::ExitSamples;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationHorizon {
    pub t_trunc: f64,
    pub nodes: usize,
    /// `M exp(-rho T)`, or the empirical tail mass for the fallback.
    pub tail_bound: f64,
    /// False when the horizon came from an empirical quantile.
    pub rigorous: bool,
}

/// Smallest node-aligned `T` with `M exp(-rho T) <= tol`, where `M` bounds
/// `E[exp(rho tau)]`. Markov's inequality turns this into a tail bound on
/// the exit time.
pub fn truncation_horizon(m: f64, rho: f64, tol: f64, h: f64) -> Result<TruncationHorizon> {
    if !(m > 0.0) || !(rho > 0.0) || !(tol > 0.0) || !(h > 0.0) {
        return invalid(format!("truncation needs M, rho, tol, h > 0 (M={m}, rho={rho}, tol={tol}, h={h})"));
    }
    let t = (m / tol).ln() / rho;
    let nodes = if t <= h { 1 } else { ((t / h) * (1.0 - 1e-12)).ceil() as usize };
    let t_trunc = nodes as f64 * h;
    Ok(TruncationHorizon { t_trunc, nodes, tail_bound: m * (-rho * t_trunc).exp(), rigorous: true })
}

/// Node-aligned `factor` times the empirical `level` quantile of the
/// exit times, used when no exponential moment is known.
pub fn fallback_horizon(samples: &ExitSamples, level: f64, factor: f64, h: f64) -> Result<TruncationHorizon> {
    if !(0.0..1.0).contains(&level) || !(factor >= 1.0) || samples.is_empty() {
        return invalid("fallback horizon needs samples, a level in [0, 1) and factor >= 1");
    }
    let mut t: Vec<f64> = samples.times.iter().map(|t| t.unwrap_or(samples.t_max)).collect();
    t.sort_by(f64::total_cmp);
    let q = t[((level * t.len() as f64) as usize).min(t.len() - 1)];
    let nodes = ((factor * q / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let t_trunc = nodes as f64 * h;
    let tail = t.iter().filter(|&&x| x > t_trunc).count() as f64 / t.len() as f64;
    Ok(TruncationHorizon { t_trunc, nodes, tail_bound: tail, rigorous: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_horizon() {
        let t = truncation_horizon(2.0, 1.0, 1e-6, 0.5).unwrap();
        assert_eq!(t.t_trunc, 15.0);
        assert!(t.tail_bound <= 1e-6);
        let t = truncation_horizon(1.0, 1.0, 0.5, 0.1).unwrap();
        assert!((t.t_trunc - 0.7).abs() < 1e-12);
        let t = truncation_horizon(1.0, 1.0, 2.0, 0.1).unwrap();
        assert_eq!(t.nodes, 1);
    }
}
