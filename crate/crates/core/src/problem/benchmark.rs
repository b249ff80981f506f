use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Constants, Domain, ProblemSpec, ScalarFn};
use crate::error::{invalid, Error, Result};
use crate::rng::stream;

/// Closed-form benchmarks. All have zero drift and identity diffusion on the
/// domain inflated by 1, tapered to zero between margins 1 and 2.
///
/// The boundary data `g` is the closed-form solution `u` evaluated at the
/// nearest point of the margin-1 box, so it vanishes on the boundary where
/// the tables say `g = 0` and stays bounded and Lipschitz everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id")]
pub enum BenchmarkId {
    /// `f = lambda` on `(-D, D)`, `u = lambda (D^2 - x^2)`.
    B1 { lambda: f64, half_width: f64 },
    /// `f(y) = c y + a` with `c < 0` on `(-D, D)`, cosh profile.
    B2 { c: f64, a: f64, half_width: f64 },
    /// `f = 0`, `g(x) = x` on `(-1, 1)`, `u = x`.
    B3,
    /// `f = d` on the Euclidean ball of radius `D`, `u = D^2 - |x|^2`.
    B4 { dim: usize, radius: f64 },
}

impl BenchmarkId {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "B1" => Ok(BenchmarkId::B1 { lambda: 0.1, half_width: 1.0 }),
            "B2" => Ok(BenchmarkId::B2 { c: -0.5, a: 0.5, half_width: 1.0 }),
            "B3" => Ok(BenchmarkId::B3),
            "B4" => Ok(BenchmarkId::B4 { dim: 2, radius: 1.0 }),
            _ => Err(Error::Config(format!("unknown benchmark {name:?}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BenchmarkId::B1 { .. } => "B1",
            BenchmarkId::B2 { .. } => "B2",
            BenchmarkId::B3 => "B3",
            BenchmarkId::B4 { .. } => "B4",
        }
    }
}

#[derive(Clone)]
pub struct BenchmarkProblem {
    pub id: BenchmarkId,
    pub problem: Arc<ProblemSpec>,
    pub solution: ScalarFn,
}

impl std::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkProblem").field("id", &self.id).finish_non_exhaustive()
    }
}

/// C^1 cutoff: 1 on `[lo - 1, hi + 1]`, 0 beyond distance 2, smoothstep between.
fn taper(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut w = 1.0;
    for i in 0..x.len() {
        let r = (lo[i] - 1.0 - x[i]).max(x[i] - hi[i] - 1.0);
        if r >= 1.0 {
            return 0.0;
        }
        if r > 0.0 {
            w *= 1.0 - r * r * (3.0 - 2.0 * r);
        }
    }
    w
}

fn clamp_to(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (a, b))| v.clamp(a - 1.0, b + 1.0))
        .collect()
}

impl BenchmarkProblem {
    pub fn new(id: BenchmarkId) -> Result<Self> {
        let (domain, x0, u): (Domain, Vec<f64>, ScalarFn) = match id {
            BenchmarkId::B1 { lambda, half_width: dw } => {
                if !(dw > 0.0) || !lambda.is_finite() {
                    return invalid(format!("bad B1 parameters {id:?}"));
                }
                (Domain::interval(-dw, dw), vec![0.0], Arc::new(move |x: &[f64]| lambda * (dw * dw - x[0] * x[0])))
            }
            BenchmarkId::B2 { c, a, half_width: dw } => {
                if !(c < 0.0) || !(dw > 0.0) || !a.is_finite() {
                    return invalid(format!("B2 needs c < 0 and D > 0, got {id:?}"));
                }
                let k = -c;
                let s = (2.0 * k).sqrt();
                (
                    Domain::interval(-dw, dw),
                    vec![0.0],
                    Arc::new(move |x: &[f64]| a / k * (1.0 - (s * x[0]).cosh() / (s * dw).cosh())),
                )
            }
            BenchmarkId::B3 => (Domain::interval(-1.0, 1.0), vec![0.0], Arc::new(|x: &[f64]| x[0])),
            BenchmarkId::B4 { dim, radius } => {
                if dim == 0 || !(radius > 0.0) {
                    return invalid(format!("bad B4 parameters {id:?}"));
                }
                (
                    Domain::ball(dim, radius),
                    vec![0.0; dim],
                    Arc::new(move |x: &[f64]| radius * radius - x.iter().map(|v| v * v).sum::<f64>()),
                )
            }
        };
        let d = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let dd = d as f64;
        let (generator, constants): (Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>, Constants) = match id {
            BenchmarkId::B1 { lambda, half_width } => (
                Arc::new(move |_, _| lambda),
                Constants {
                    l_mu: 0.0,
                    l_sigma: 1.5,
                    l_f: 0.25,
                    l_g: 2.0 * lambda.abs() * (half_width + 1.0),
                    sup_f0: lambda.abs(),
                },
            ),
            BenchmarkId::B2 { c, a, half_width } => {
                let k = -c;
                let s = (2.0 * k).sqrt();
                let l_g = (a / k).abs() * s * (s * (half_width + 1.0)).sinh() / (s * half_width).cosh();
                (
                    Arc::new(move |_, y| c * y + a),
                    Constants { l_mu: 0.0, l_sigma: 1.5, l_f: k, l_g, sup_f0: a.abs() },
                )
            }
            BenchmarkId::B3 => (
                Arc::new(|_, _| 0.0),
                Constants { l_mu: 0.0, l_sigma: 1.5, l_f: 0.25, l_g: 1.0, sup_f0: 0.0 },
            ),
            BenchmarkId::B4 { dim, radius } => (
                Arc::new(move |_, _| dim as f64),
                Constants {
                    l_mu: 0.0,
                    l_sigma: 1.5 * dd,
                    l_f: 0.25,
                    l_g: 2.0 * (radius + 1.0) * dd.sqrt(),
                    sup_f0: dd,
                },
            ),
        };
        let (tlo, thi) = (lo.clone(), hi.clone());
        let (glo, ghi) = (lo, hi);
        let ug = u.clone();
        let problem = ProblemSpec {
            name: id.label().to_string(),
            dim: d,
            drift: Arc::new(|_, out: &mut [f64]| out.fill(0.0)),
            diffusion: Arc::new(move |x: &[f64], out: &mut [f64]| {
                let w = taper(x, &tlo, &thi);
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = w;
                }
            }),
            generator,
            boundary: Arc::new(move |x: &[f64]| ug(&clamp_to(x, &glo, &ghi))),
            domain,
            x0,
            constants,
        };
        problem.validate()?;
        Ok(Self { id, problem: Arc::new(problem), solution: u })
    }

    /// Closed-form `u(x)` on the closure of the domain.
    pub fn analytic_value(&self, x: &[f64]) -> Result<f64> {
        let dom = &self.problem.domain;
        if x.len() != self.problem.dim || dom.depth(x) < -1e-12 {
            return invalid(format!("{x:?} is outside the closed domain"));
        }
        Ok((self.solution)(x))
    }

    /// Largest `|1/2 tr(a D^2 u) + mu . Du + f(x, u)|` at `n` random interior
    /// points, with central differences of step `step`.
    pub fn pde_residual(&self, n: usize, step: f64, seed: u64) -> f64 {
        let p = &self.problem;
        let d = p.dim;
        let (lo, hi) = p.domain.bounding_box();
        let mut rng = stream(seed, u64::MAX - 1);
        let u = &self.solution;
        let mut mu = vec![0.0; d];
        let mut sig = vec![0.0; d * d];
        let mut worst: f64 = 0.0;
        let mut done = 0;
        while done < n {
            let x: Vec<f64> = (0..d).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
            if p.domain.depth(&x) <= 2.0 * step {
                continue;
            }
            done += 1;
            (p.drift)(&x, &mut mu);
            (p.diffusion)(&x, &mut sig);
            let at = |shift: &[(usize, f64)]| {
                let mut z = x.clone();
                for &(i, s) in shift {
                    z[i] += s;
                }
                u(&z)
            };
            let u0 = u(&x);
            let mut lu = 0.0;
            for i in 0..d {
                let grad = (at(&[(i, step)]) - at(&[(i, -step)])) / (2.0 * step);
                lu += mu[i] * grad;
                for j in 0..d {
                    let a_ij: f64 = (0..d).map(|k| sig[i * d + k] * sig[j * d + k]).sum();
                    if a_ij == 0.0 {
                        continue;
                    }
                    let hess = if i == j {
                        (at(&[(i, step)]) - 2.0 * u0 + at(&[(i, -step)])) / (step * step)
                    } else {
                        (at(&[(i, step), (j, step)]) - at(&[(i, step), (j, -step)])
                            - at(&[(i, -step), (j, step)])
                            + at(&[(i, -step), (j, -step)]))
                            / (4.0 * step * step)
                    };
                    lu += 0.5 * a_ij * hess;
                }
            }
            worst = worst.max((lu + (p.generator)(&x, u0)).abs());
        }
        worst
    }
}
