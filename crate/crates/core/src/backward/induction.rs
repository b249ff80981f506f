use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::implicit::implicit_node_solve;
use super::quadrature::tensor_rule;
use super::{DiscreteSolution, TensorMesh};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Mesh points per axis over the domain's bounding box.
    pub mesh_points: usize,
    pub gh_order: usize,
    /// Absolute tolerance of the implicit step.
    pub tol: f64,
    /// Largest allowed ratio of mesh cell width to the one-step spread
    /// `sqrt(h) |sigma|`.
    pub max_cell_ratio: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { mesh_points: 401, gh_order: 16, tol: 1e-10, max_cell_ratio: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantCheck {
    /// Largest `|v(t, x)| / bound(t)` over all slices.
    pub max_ratio: f64,
    pub ok: bool,
}

/// `v(n h, x)` on a mesh for `n = 0..=nodes`. Off the open domain the value
/// is `g`.
#[derive(Clone)]
pub struct ValueSlices {
    pub problem: std::sync::Arc<ProblemSpec>,
    pub mesh: TensorMesh,
    pub h: f64,
    pub nodes: usize,
    pub interior: Vec<bool>,
    pub data: Vec<f64>,
    pub majorant: MajorantCheck,
    pub max_iterations: usize,
}

impl std::fmt::Debug for ValueSlices {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ValueSlices")
            .field("mesh", &self.mesh)
            .field("h", &self.h)
            .field("nodes", &self.nodes)
            .field("majorant", &self.majorant)
            .finish_non_exhaustive()
    }
}

impl ValueSlices {
    pub fn slice(&self, n: usize) -> &[f64] {
        let m = self.mesh.len();
        let n = n.min(self.nodes);
        &self.data[n * m..(n + 1) * m]
    }

    pub fn value_at(&self, n: usize, x: &[f64]) -> f64 {
        if !self.problem.domain.contains(x) {
            return (self.problem.boundary)(x);
        }
        let mut s = Vec::with_capacity(1 << self.mesh.dim());
        self.mesh.interpolate(self.slice(n), x, &mut s)
    }
}

impl DiscreteSolution for ValueSlices {
    fn value(&self, _path: usize, node: usize, x: &[f64]) -> f64 {
        self.value_at(node, x)
    }
}

/// Sparse one-step expectation operator on the mesh: row `j` holds the
/// quadrature weights that land inside the domain, interpolated onto mesh
/// corners, and the mass that lands outside, already multiplied by `g`.
struct StepOperator {
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    exterior: Vec<f64>,
    g_max: f64,
}

fn build_operator(p: &ProblemSpec, mesh: &TensorMesh, interior: &[bool], h: f64, order: usize) -> Result<StepOperator> {
    let d = p.dim;
    let (z, w) = tensor_rule(order, d)?;
    let sq = h.sqrt();
    let rows: Vec<(Vec<(u32, f64)>, f64, f64)> = (0..mesh.len())
        .into_par_iter()
        .map(|j| {
            if !interior[j] {
                return (Vec::new(), 0.0, 0.0);
            }
            let mut x = vec![0.0; d];
            mesh.point(j, &mut x);
            let mut mu = vec![0.0; d];
            let mut sig = vec![0.0; d * d];
            (p.drift)(&x, &mut mu);
            (p.diffusion)(&x, &mut sig);
            let mut y = vec![0.0; d];
            let mut st = Vec::new();
            let mut row: Vec<(u32, f64)> = Vec::new();
            let mut ext = 0.0;
            let mut gmax: f64 = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let zk = &z[k * d..(k + 1) * d];
                for i in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += sig[i * d + l] * zk[l];
                    }
                    y[i] = x[i] + mu[i] * h + sq * s;
                }
                if p.domain.contains(&y) {
                    mesh.stencil(&y, &mut st);
                    for &(c, cw) in &st {
                        if cw != 0.0 {
                            row.push((c as u32, wk * cw));
                        }
                    }
                } else {
                    let gy = (p.boundary)(&y);
                    gmax = gmax.max(gy.abs());
                    ext += wk * gy;
                }
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            (merged, ext, gmax)
        })
        .collect();
    let mut op = StepOperator { row_start: vec![0], cols: Vec::new(), vals: Vec::new(), exterior: Vec::new(), g_max: 0.0 };
    for (row, ext, gmax) in rows {
        for (c, v) in row {
            op.cols.push(c);
            op.vals.push(v);
        }
        op.row_start.push(op.cols.len());
        op.exterior.push(ext);
        op.g_max = op.g_max.max(gmax);
    }
    Ok(op)
}

/// Backward induction of the implicit scheme on a mesh, from the terminal
/// closure `v(T, .) = g` at node `nodes` down to node 0.
pub fn backward_induction(
    problem: std::sync::Arc<ProblemSpec>,
    h: f64,
    nodes: usize,
    opts: &QuadratureOptions,
) -> Result<ValueSlices> {
    let p = &*problem;
    p.validate()?;
    let d = p.dim;
    let l_f = p.constants.l_f;
    if !(h > 0.0) || nodes == 0 {
        return Err(Error::InvalidInput(format!("need h > 0 and at least one node (h={h}, nodes={nodes})")));
    }
    let (lo, hi) = p.domain.bounding_box();
    let mesh = TensorMesh::new(lo, hi, vec![opts.mesh_points; d])?;
    let m = mesh.len();
    let mut x = vec![0.0; d];
    let mut interior = vec![false; m];
    let mut spread: f64 = 0.0;
    let mut sig = vec![0.0; d * d];
    for (j, inside) in interior.iter_mut().enumerate() {
        mesh.point(j, &mut x);
        *inside = p.domain.contains(&x);
        if *inside {
            (p.diffusion)(&x, &mut sig);
            let fro = sig.iter().map(|s| s * s).sum::<f64>().sqrt() / (d as f64).sqrt();
            spread = spread.max(fro * h.sqrt());
        }
    }
    if spread > 0.0 && mesh.max_step() > opts.max_cell_ratio * spread {
        return Err(Error::Config(format!(
            "mesh cell {:.4} exceeds {} x one-step spread {:.4}; refine the mesh",
            mesh.max_step(),
            opts.max_cell_ratio,
            spread
        )));
    }
    let op = build_operator(p, &mesh, &interior, h, opts.gh_order)?;
    let points: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut x = vec![0.0; d];
            mesh.point(j, &mut x);
            x
        })
        .collect();
    let g: Vec<f64> = points.iter().map(|x| (p.boundary)(x)).collect();
    let mut data = vec![0.0; (nodes + 1) * m];
    data[nodes * m..].copy_from_slice(&g);
    let mut max_iterations = 0;
    for n in (0..nodes).rev() {
        let (head, tail) = data.split_at_mut((n + 1) * m);
        let next = &tail[..m];
        let cur = &mut head[n * m..];
        let iters: Result<Vec<usize>> = cur
            .par_iter_mut()
            .enumerate()
            .map(|(j, out)| {
                if !interior[j] {
                    *out = g[j];
                    return Ok(0);
                }
                let mut q = op.exterior[j];
                for e in op.row_start[j]..op.row_start[j + 1] {
                    q += op.vals[e] * next[op.cols[e] as usize];
                }
                let s = implicit_node_solve(q, &points[j], &*p.generator, h, l_f, opts.tol)?;
                *out = s.y;
                Ok(s.iterations)
            })
            .collect();
        max_iterations = max_iterations.max(iters?.into_iter().max().unwrap_or(0));
    }
    let c = p.constants;
    let g_sup = g.iter().fold(op.g_max, |a, v| a.max(v.abs()));
    let gamma = 1.0 - 3.0 * l_f * h;
    let mut max_ratio: f64 = 0.0;
    for n in 0..=nodes {
        let rem = (nodes - n) as f64 * h;
        let mut b2 = g_sup * g_sup;
        if gamma > 0.0 {
            b2 += rem * c.sup_f0 * c.sup_f0 / (gamma * l_f);
        } else {
            b2 = f64::INFINITY;
        }
        let bound = ((4.0 * l_f * rem).exp() * b2).sqrt();
        let vmax = data[n * m..(n + 1) * m].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let r = if bound > 0.0 { vmax / bound } else if vmax > 0.0 { f64::INFINITY } else { 0.0 };
        max_ratio = max_ratio.max(r);
    }
    Ok(ValueSlices {
        problem: problem.clone(),
        mesh,
        h,
        nodes,
        interior,
        data,
        majorant: MajorantCheck { max_ratio, ok: max_ratio <= 1.0 + 1e-9 },
        max_iterations,
    })
}
