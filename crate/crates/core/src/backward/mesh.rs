use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform tensor mesh over a box, axis 0 fastest in the flat index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorMesh {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
    pub step: Vec<f64>,
}

impl TensorMesh {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != points.len() || lo.is_empty() {
            return invalid("mesh bounds and sizes disagree in dimension");
        }
        if points.iter().any(|&n| n < 2) {
            return invalid("mesh needs at least two points per axis");
        }
        let total = points.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        if total.map_or(true, |t| t > 50_000_000) {
            return invalid("mesh too large");
        }
        let step = lo.iter().zip(&hi).zip(&points).map(|((a, b), n)| (b - a) / (*n as f64 - 1.0)).collect();
        Ok(Self { lo, hi, points, step })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_step(&self) -> f64 {
        self.step.iter().cloned().fold(0.0, f64::max)
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in 0..self.dim() {
            let i = rem % self.points[k];
            rem /= self.points[k];
            out[k] = if i + 1 == self.points[k] { self.hi[k] } else { self.lo[k] + i as f64 * self.step[k] };
        }
    }

    /// Multilinear stencil of `x`: pushes `(flat index, weight)` for the
    /// corners of its cell. Points outside the box are clamped.
    pub fn stencil(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((0, 1.0));
        let mut stride = 1;
        for k in 0..self.dim() {
            let n = self.points[k];
            let s = ((x[k] - self.lo[k]) / self.step[k]).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            let fr = s - i as f64;
            let len = out.len();
            for c in 0..len {
                let (idx, w) = out[c];
                out[c] = (idx + i * stride, w * (1.0 - fr));
                out.push((idx + (i + 1) * stride, w * fr));
            }
            stride *= n;
        }
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64], scratch: &mut Vec<(usize, f64)>) -> f64 {
        self.stencil(x, scratch);
        scratch.iter().map(|(i, w)| w * values[*i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_affine() {
        let m = TensorMesh::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![5, 9]).unwrap();
        let mut p = [0.0; 2];
        let vals: Vec<f64> = (0..m.len())
            .map(|j| {
                m.point(j, &mut p);
                1.0 + 2.0 * p[0] - 3.0 * p[1]
            })
            .collect();
        let mut s = Vec::new();
        let v = m.interpolate(&vals, &[0.3, -0.77], &mut s);
        assert!((v - (1.0 + 0.6 + 2.31)).abs() < 1e-12);
    }

    #[test]
    fn endpoints_are_exact() {
        let m = TensorMesh::new(vec![-1.0], vec![1.0], vec![401]).unwrap();
        let mut p = [0.0];
        m.point(400, &mut p);
        assert_eq!(p[0], 1.0);
        m.point(200, &mut p);
        assert!(p[0].abs() < 1e-15);
    }
}
