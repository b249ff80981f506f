use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{HatBasis, Projection, Projector};
use super::DiscreteSolution;
use crate::error::{invalid, Error, Result};
use crate::forward::{NodeStore, PathBundle};

/// One value per (node, path) with `node <= tau_bar`, in the bundle's
/// node-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSequence {
    pub values: Vec<f64>,
}

fn store(b: &PathBundle) -> Result<&NodeStore> {
    b.store.as_ref().ok_or_else(|| Error::InvalidInput("bundle was simulated without node storage".into()))
}

impl PathSequence {
    pub fn zeros(b: &PathBundle) -> Result<Self> {
        let s = store(b)?;
        Ok(Self { values: vec![0.0; s.x.len() / s.d] })
    }

    /// Sequence `value(node, state)` for `node < tau_bar` and `g` at `tau_bar`.
    pub fn from_fn(b: &PathBundle, mut value: impl FnMut(usize, &[f64]) -> f64) -> Result<Self> {
        let s = store(b)?;
        let mut values = Vec::with_capacity(s.x.len() / s.d);
        for n in 0..s.nodes() {
            let alive = s.counts.get(n + 1).copied().unwrap_or(0);
            for r in 0..s.counts[n] {
                let x = s.state(n, r);
                values.push(if r < alive { value(n, x) } else { (b.problem.boundary)(x) });
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, s: &NodeStore, n: usize, r: usize) -> f64 {
        self.values[s.offsets[n] + r]
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }
}

/// Picard sequence bound to its bundle, for error evaluation.
pub struct BoundSequence<'a> {
    pub seq: &'a PathSequence,
    pub bundle: &'a PathBundle,
}

impl DiscreteSolution for BoundSequence<'_> {
    fn value(&self, path: usize, node: usize, x: &[f64]) -> f64 {
        let s = self.bundle.store.as_ref().expect("bound sequence needs node storage");
        let r = s.rank[path] as usize;
        if node < s.nodes() && r < s.counts[node] {
            self.seq.get(s, node, r)
        } else {
            (self.bundle.problem.boundary)(x)
        }
    }
}

/// `sum_n phi(n h) || 1{n <= tau_bar} R_n ||_{L^2}` with
/// `phi(t) = (1 - 3 L_f h)^(-t/h)`.
pub fn weighted_seq_norm(r: &PathSequence, b: &PathBundle, l_f: f64) -> Result<f64> {
    let s = store(b)?;
    let gamma = 1.0 - 3.0 * l_f * b.grid.h;
    if !(gamma > 0.0) {
        return invalid(format!("weighted norm needs 3 L_f h < 1, got {}", 1.0 - gamma));
    }
    let inv = 1.0 / gamma;
    let mut phi = 1.0;
    let mut total = 0.0;
    for n in 0..s.nodes() {
        let sl = &r.values[s.offsets[n]..s.offsets[n] + s.counts[n]];
        let ss: f64 = sl.iter().map(|v| v * v).sum();
        total += phi * (ss / b.n_paths as f64).sqrt();
        phi *= inv;
    }
    Ok(total)
}

/// Geometric bound on the part of the norm beyond the truncation node,
/// assuming `|R| <= sup_r` and `P[tau > t] <= m exp(-rho t)`. Infinite when
/// the series diverges.
pub fn norm_tail_slack(b: &PathBundle, l_f: f64, sup_r: f64, m: f64, rho: f64) -> f64 {
    let h = b.grid.h;
    let n0 = b.grid.nodes() as f64 + 1.0;
    let rate = -(1.0 - 3.0 * l_f * h).ln() - 0.5 * rho * h;
    if rate >= 0.0 {
        return f64::INFINITY;
    }
    sup_r * m.sqrt() * (rate * n0).exp() / (1.0 - rate.exp())
}

fn node_projectors(b: &PathBundle, basis: &HatBasis) -> Result<Vec<Option<Projector>>> {
    let s = store(b)?;
    Ok((0..s.nodes())
        .into_par_iter()
        .map(|n| {
            let alive = s.counts.get(n + 1).copied().unwrap_or(0);
            (alive > 0).then(|| basis.projector(&s.slab(n)[..alive * s.d]))
        })
        .collect())
}

/// `T(R)_t = 1{t<tau} (E_t[R_{t+h}] + h f(X_t, R_t)) + 1{t=tau} g(X_tau)`,
/// with `E_t` the empirical projection onto `basis` of the paths alive at t.
/// Also returns the number of nodes that fell back to cell means.
pub fn picard_operator_apply(r: &PathSequence, b: &PathBundle, basis: &HatBasis) -> Result<(PathSequence, usize)> {
    let proj = node_projectors(b, basis)?;
    apply_with(r, b, &proj)
}

fn apply_with(r: &PathSequence, b: &PathBundle, proj: &[Option<Projector>]) -> Result<(PathSequence, usize)> {
    let s = store(b)?;
    let h = b.grid.h;
    let p = &b.problem;
    let per_node: Vec<Vec<f64>> = (0..s.nodes())
        .into_par_iter()
        .map(|n| {
            let c = s.counts[n];
            let alive = s.counts.get(n + 1).copied().unwrap_or(0);
            let mut out = vec![0.0; c];
            if let Some(pr) = &proj[n] {
                let ys = &r.values[s.offsets[n + 1]..s.offsets[n + 1] + alive];
                pr.apply(ys, &mut out[..alive]);
                let cur = &r.values[s.offsets[n]..];
                for k in 0..alive {
                    out[k] += h * (p.generator)(s.state(n, k), cur[k]);
                }
            }
            for (k, o) in out.iter_mut().enumerate().skip(alive) {
                *o = (p.boundary)(s.state(n, k));
            }
            out
        })
        .collect();
    let fallbacks = proj.iter().flatten().filter(|p| p.kind() == Projection::CellMean).count();
    let values = per_node.into_iter().flatten().collect();
    Ok((PathSequence { values }, fallbacks))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub max_iterations: usize,
    /// Stop once the weighted residual is at most this.
    pub tol: f64,
    pub bins: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, tol: 1e-10, bins: 32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardIteration {
    pub iteration: usize,
    /// `||Y^{k+1} - Y^k||`.
    pub residual: f64,
    /// Ratio to the previous residual.
    pub ratio: Option<f64>,
    /// Nodes that fell back to cell means.
    pub fallback_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub seq: PathSequence,
    pub history: Vec<PicardIteration>,
    pub converged: bool,
    /// Theoretical contraction factor `1 - 2 L_f h`.
    pub contraction_bound: f64,
}

impl PicardSolution {
    pub fn max_ratio(&self) -> f64 {
        self.history.iter().filter_map(|it| it.ratio).fold(0.0, f64::max)
    }
}

/// Iterates `T` from the zero sequence.
pub fn solve_picard(b: &PathBundle, opts: &PicardOptions) -> Result<PicardSolution> {
    let l_f = b.problem.constants.l_f;
    let h = b.grid.h;
    if !(3.0 * l_f * h < 1.0) {
        return invalid(format!("Picard iteration needs 3 L_f h < 1, got {}", 3.0 * l_f * h));
    }
    let (lo, hi) = b.problem.domain.bounding_box();
    let basis = HatBasis::new(lo, hi, opts.bins);
    let proj = node_projectors(b, &basis)?;
    let mut cur = PathSequence::zeros(b)?;
    let mut history = Vec::new();
    let mut prev_res: Option<f64> = None;
    let mut expanding = 0;
    for it in 0..opts.max_iterations {
        let (next, fallback_nodes) = apply_with(&cur, b, &proj)?;
        let res = weighted_seq_norm(&next.sub(&cur), b, l_f)?;
        let ratio = prev_res.filter(|p| *p > 0.0).map(|p| res / p);
        history.push(PicardIteration { iteration: it + 1, residual: res, ratio, fallback_nodes });
        cur = next;
        if res <= opts.tol {
            return Ok(PicardSolution { seq: cur, history, converged: true, contraction_bound: 1.0 - 2.0 * l_f * h });
        }
        if ratio.is_some_and(|r| r > 1.0) {
            expanding += 1;
            if expanding >= 3 {
                return Err(Error::NonConvergence(format!(
                    "Picard residual grew for 3 consecutive iterations (last ratio {:.4})",
                    ratio.unwrap()
                )));
            }
        } else {
            expanding = 0;
        }
        prev_res = Some(res);
    }
    Ok(PicardSolution { seq: cur, history, converged: false, contraction_bound: 1.0 - 2.0 * l_f * h })
}
