use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

/// Tensor-product piecewise-linear hat functions on `bins` cells per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatBasis {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: usize,
    /// Least squares needs at least this many samples per basis function;
    /// otherwise cell means are used.
    pub samples_per_function: usize,
    /// Above this basis size the dense normal equations are skipped in
    /// favour of cell means.
    pub max_dense: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    LeastSquares,
    CellMean,
}

impl HatBasis {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: usize) -> Self {
        Self { lo, hi, bins: bins.max(1), samples_per_function: 5, max_dense: 400 }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn size(&self) -> usize {
        (self.bins + 1).saturating_pow(self.dim() as u32)
    }

    fn cell(&self, x: &[f64], k: usize) -> (usize, f64) {
        let s = ((x[k] - self.lo[k]) / (self.hi[k] - self.lo[k]) * self.bins as f64).clamp(0.0, self.bins as f64);
        let i = (s.floor() as usize).min(self.bins - 1);
        (i, s - i as f64)
    }

    fn stencil(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((0, 1.0));
        let mut stride = 1;
        for k in 0..self.dim() {
            let (i, fr) = self.cell(x, k);
            let len = out.len();
            for c in 0..len {
                let (idx, w) = out[c];
                out[c] = (idx + i * stride, w * (1.0 - fr));
                out.push((idx + (i + 1) * stride, w * fr));
            }
            stride *= self.bins + 1;
        }
    }

    fn cell_key(&self, x: &[f64]) -> u64 {
        let mut key = 0u64;
        for k in 0..self.dim() {
            key = key * self.bins as u64 + self.cell(x, k).0 as u64;
        }
        key
    }

    /// Empirical projection of `ys` onto the basis, evaluated back at the
    /// sample points `xs` (row-major, n×d).
    pub fn project(&self, xs: &[f64], ys: &[f64], out: &mut [f64]) -> Projection {
        let p = self.projector(xs);
        p.apply(ys, out);
        p.kind()
    }

    /// Factorizes the design of `xs` once so several targets can be
    /// projected on the same sample.
    pub fn projector(&self, xs: &[f64]) -> Projector {
        let d = self.dim();
        let n = xs.len() / d;
        let m = self.size();
        if m <= self.max_dense && n >= self.samples_per_function * m {
            if let Some(p) = self.least_squares(xs) {
                return p;
            }
        }
        let mut ids: HashMap<u64, u32> = HashMap::new();
        let mut counts = Vec::new();
        let cell_of = (0..n)
            .map(|i| {
                let key = self.cell_key(&xs[i * d..(i + 1) * d]);
                let next = ids.len() as u32;
                let id = *ids.entry(key).or_insert(next);
                if id as usize == counts.len() {
                    counts.push(0.0);
                }
                counts[id as usize] += 1.0;
                id
            })
            .collect();
        Projector::CellMean { cell_of, counts }
    }

    fn least_squares(&self, xs: &[f64]) -> Option<Projector> {
        let d = self.dim();
        let m = self.size();
        let per = 1usize << d;
        let n = xs.len() / d;
        let mut stencils = Vec::with_capacity(n * per);
        let mut st = Vec::with_capacity(per);
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            self.stencil(&xs[i * d..(i + 1) * d], &mut st);
            for &(a, wa) in &st {
                for &(b, wb) in &st {
                    gram[(a, b)] += wa * wb;
                }
            }
            stencils.extend(st.iter().map(|&(a, w)| (a as u32, w)));
        }
        let diag_max = (0..m).map(|k| gram[(k, k)]).fold(0.0, f64::max);
        for k in 0..m {
            if gram[(k, k)] == 0.0 {
                gram[(k, k)] = 1.0;
            } else {
                gram[(k, k)] += 1e-12 * diag_max;
            }
        }
        let chol = gram.cholesky()?;
        Some(Projector::LeastSquares { stencils, per, m, chol })
    }
}

/// Precomputed projection for one sample of design points.
pub enum Projector {
    LeastSquares { stencils: Vec<(u32, f64)>, per: usize, m: usize, chol: Cholesky<f64, Dyn> },
    CellMean { cell_of: Vec<u32>, counts: Vec<f64> },
}

impl Projector {
    pub fn kind(&self) -> Projection {
        match self {
            Projector::LeastSquares { .. } => Projection::LeastSquares,
            Projector::CellMean { .. } => Projection::CellMean,
        }
    }

    pub fn apply(&self, ys: &[f64], out: &mut [f64]) {
        match self {
            Projector::LeastSquares { stencils, per, m, chol } => {
                let mut rhs = DVector::<f64>::zeros(*m);
                for (y, st) in ys.iter().zip(stencils.chunks_exact(*per)) {
                    for &(a, w) in st {
                        rhs[a as usize] += w * y;
                    }
                }
                let coef = chol.solve(&rhs);
                for (o, st) in out.iter_mut().zip(stencils.chunks_exact(*per)) {
                    *o = st.iter().map(|&(a, w)| w * coef[a as usize]).sum();
                }
            }
            Projector::CellMean { cell_of, counts } => {
                let mut sums = vec![0.0; counts.len()];
                for (c, y) in cell_of.iter().zip(ys) {
                    sums[*c as usize] += y;
                }
                for (o, c) in out.iter_mut().zip(cell_of) {
                    *o = sums[*c as usize] / counts[*c as usize];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_piecewise_linear_targets() {
        let b = HatBasis::new(vec![-1.0], vec![1.0], 4);
        let xs: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 200.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let mut out = vec![0.0; xs.len()];
        assert_eq!(b.project(&xs, &ys, &mut out), Projection::LeastSquares);
        for (o, y) in out.iter().zip(&ys) {
            assert!((o - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_samples_use_cell_means() {
        let b = HatBasis::new(vec![-1.0], vec![1.0], 32);
        let xs = [0.01, 0.02, 0.9];
        let ys = [1.0, 3.0, 5.0];
        let mut out = [0.0; 3];
        assert_eq!(b.project(&xs, &ys, &mut out), Projection::CellMean);
        assert_eq!(out, [2.0, 2.0, 5.0]);
    }
}
