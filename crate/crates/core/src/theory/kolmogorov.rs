use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forward::{ReferenceExit, Stepper};
use crate::problem::ProblemSpec;
use crate::rng::{Noise, PathRng};
use crate::stats::{ols_slope, Accumulator, MeanCi};

/// Paths sampled on an equidistant grid, row-major
/// `n_paths × (steps + 1) × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPaths {
    pub dim: usize,
    pub dt: f64,
    pub steps: usize,
    pub n_paths: usize,
    pub values: Vec<f64>,
}

impl SampledPaths {
    pub fn path(&self, i: usize) -> &[f64] {
        let len = (self.steps + 1) * self.dim;
        &self.values[i * len..(i + 1) * len]
    }

    /// Standard Brownian motion in `R^dim` started at 0.
    pub fn brownian(dim: usize, dt: f64, steps: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if dim == 0 || !(dt > 0.0) || steps == 0 || n_paths == 0 {
            return invalid("Brownian sampling needs dim, dt, steps and paths");
        }
        let sq = dt.sqrt();
        let values: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = PathRng::new(seed, i as u64, Noise::Gaussian);
                let mut out = vec![0.0; (steps + 1) * dim];
                for n in 1..=steps {
                    for j in 0..dim {
                        out[n * dim + j] = out[(n - 1) * dim + j] + sq * rng.normal();
                    }
                }
                out
            })
            .collect();
        Ok(Self { dim, dt, steps, n_paths, values: values.concat() })
    }

    /// Continuous Euler–Maruyama interpolation with step `h`, sampled at
    /// `refine` points per step, over `coarse_steps` steps. Not stopped.
    pub fn euler_interpolation(
        p: &ProblemSpec,
        h: f64,
        refine: usize,
        coarse_steps: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        p.validate()?;
        if refine == 0 || coarse_steps == 0 || n_paths == 0 || !(h > 0.0) {
            return invalid("interpolation sampling needs h, refine, steps and paths");
        }
        let d = p.dim;
        let steps = coarse_steps * refine;
        let values: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut st = Stepper::new(p, h, refine, seed, i as u64, Noise::Gaussian, ReferenceExit::Grid)
                    .with_fine()
                    .with_interpolation();
                let mut out = Vec::with_capacity((steps + 1) * d);
                out.extend_from_slice(&p.x0);
                for _ in 0..coarse_steps {
                    st.step_with(|v| out.extend_from_slice(v.interp));
                }
                out
            })
            .collect();
        Ok(Self { dim: d, dt: h / refine as f64, steps, n_paths, values: values.concat() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovFit {
    pub p: f64,
    /// `(lag, E|P_{s+lag} - P_s|^p)` with the moment's CI.
    pub moments: Vec<(f64, MeanCi)>,
    pub slope: f64,
    /// `slope / p`.
    pub alpha: f64,
}

/// Fits `log E|P_{s+lag} - P_s|^p ~ p alpha log lag`. Lags are multiples
/// of `dt`; each path contributes the mean over its non-overlapping
/// windows of that length.
pub fn kolmogorov_ratio_fit(paths: &SampledPaths, p: f64, lags: &[usize]) -> Result<KolmogorovFit> {
    if !(p >= 2.0) {
        return invalid(format!("Kolmogorov fit needs p >= 2, got {p}"));
    }
    let mut ls: Vec<usize> = lags.to_vec();
    ls.sort_unstable();
    ls.dedup();
    if ls.len() < 3 {
        return invalid("need at least 3 distinct lags");
    }
    for &l in &ls {
        let t = l as f64 * paths.dt;
        if l == 0 || l > paths.steps || t > 1.0 + 1e-12 {
            return invalid(format!("lag {l} (time {t}) outside [dt, min(1, horizon)]"));
        }
    }
    let d = paths.dim;
    let mut moments = Vec::with_capacity(ls.len());
    for &l in &ls {
        let per_path: Vec<f64> = (0..paths.n_paths)
            .into_par_iter()
            .map(|i| {
                let x = paths.path(i);
                let windows = paths.steps / l;
                let mut s = 0.0;
                for w in 0..windows {
                    let (a, b) = (w * l * d, (w + 1) * l * d);
                    let n2: f64 = (0..d).map(|j| (x[b + j] - x[a + j]).powi(2)).sum();
                    s += n2.powf(0.5 * p);
                }
                s / windows as f64
            })
            .collect();
        let mut acc = Accumulator::default();
        for v in per_path {
            acc.push(v);
        }
        moments.push((l as f64 * paths.dt, acc.finish()));
    }
    if moments.iter().any(|(_, m)| !(m.mean > 0.0)) {
        return invalid("increment moments vanish; the ratio is undefined");
    }
    let xs: Vec<f64> = moments.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = moments.iter().map(|(_, m)| m.mean.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    Ok(KolmogorovFit { p, moments, slope, alpha: slope / p })
}

/// Lags `1, 2, 4, ...` up to `min(steps, 1 / dt)`.
pub fn dyadic_lags(paths: &SampledPaths) -> Vec<usize> {
    let cap = paths.steps.min((1.0 / paths.dt + 1e-9).floor() as usize);
    std::iter::successors(Some(1usize), |l| Some(l * 2)).take_while(|l| *l <= cap).collect()
}
