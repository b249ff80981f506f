//! Sample statistics and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width of the 95% normal interval.
    pub ci: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut acc = Accumulator::default();
        for &x in xs {
            acc.push(x);
        }
        acc.finish()
    }

    pub fn se(&self) -> f64 {
        self.ci / Z95
    }
}

/// Running mean and variance (Welford). Order-dependent in the last bits, so
/// callers feed it in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self) -> MeanCi {
        if self.n == 0 {
            return MeanCi { mean: f64::NAN, ci: f64::NAN, n: 0 };
        }
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        MeanCi {
            mean: self.mean,
            ci: Z95 * (var / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub n_used: usize,
    pub warnings: Vec<String>,
}

/// Weighted least squares of `ln v` on `ln h`.
///
/// Points are `(h, v, ci)`. Non-positive values are dropped with a warning.
/// Weights are `1/se_log^2` with `se_log = ci / (Z95 v)`; when any surviving
/// point has a zero or missing interval the fit is unweighted.
pub fn fit_rate(points: &[(f64, f64, f64)]) -> Result<RateFit> {
    let mut warnings = Vec::new();
    let mut used = Vec::new();
    for &(h, v, ci) in points {
        if !(h > 0.0) || !h.is_finite() {
            return invalid(format!("stepsize {h} is not positive"));
        }
        if !(v > 0.0) || !v.is_finite() {
            warnings.push(format!("dropped non-positive value {v} at h={h}"));
            continue;
        }
        used.push((h.ln(), v.ln(), ci / (Z95 * v)));
    }
    if used.len() < 3 {
        return invalid(format!("rate fit needs 3 positive points, got {}", used.len()));
    }
    let weighted = used.iter().all(|p| p.2 > 0.0 && p.2.is_finite());
    let w: Vec<f64> = used
        .iter()
        .map(|p| if weighted { 1.0 / (p.2 * p.2) } else { 1.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    let xbar = used.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let ybar = used.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = used.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = used
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.0 - xbar) * (p.1 - ybar))
        .sum();
    if !(sxx > 0.0) {
        return invalid("rate fit needs at least two distinct stepsizes");
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let n = used.len() as f64;
        let rss: f64 = used
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    };
    Ok(RateFit { slope, intercept, stderr, n_used: used.len(), warnings })
}

/// Plain least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xb = xs.iter().sum::<f64>() / n;
    let yb = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xb) * (y - yb)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xb).powi(2)).sum();
    sxy / sxx
}
