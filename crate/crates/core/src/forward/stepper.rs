use serde::{Deserialize, Serialize};

use crate::problem::ProblemSpec;
use crate::rng::{Noise, PathRng};

/// How the fine chain's exit time stands in for the continuous one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceExit {
    /// Crossing inside a fine step is tested with the Brownian-bridge
    /// probability of the frozen local noise.
    #[default]
    Bridge,
    /// First fine node outside the domain.
    Grid,
}

/// One fine sub-step, handed to observers.
pub struct FineView<'a> {
    /// Fine time at the end of the sub-step.
    pub t: f64,
    /// Index of the sub-step within the coarse step, 1..=K.
    pub sub: usize,
    pub fine: &'a [f64],
    /// Continuous interpolation of the coarse chain at `t`. Empty unless
    /// requested with [`Stepper::with_interpolation`].
    pub interp: &'a [f64],
    /// Set on the sub-step where the reference exit happens.
    pub exit: Option<(f64, &'a [f64])>,
}

/// Coupled Euler–Maruyama chains of one path.
///
/// Each coarse increment is the sum, in order, of its K fine increments.
/// Neither chain is stopped; callers read the exit records they need.
pub struct Stepper<'a> {
    p: &'a ProblemSpec,
    h: f64,
    k: usize,
    dt: f64,
    sqdt: f64,
    rng: PathRng,
    evolve_coarse: bool,
    evolve_fine: bool,
    want_interp: bool,
    reference: ReferenceExit,
    pub node: usize,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub w: Vec<f64>,
    pub fine_exit: Option<(f64, Vec<f64>)>,
    pub fault: bool,
    dw: Vec<f64>,
    z: Vec<f64>,
    mu: Vec<f64>,
    sig: Vec<f64>,
    mu_c: Vec<f64>,
    sig_c: Vec<f64>,
    prev: Vec<f64>,
    interp: Vec<f64>,
    exit_buf: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        p: &'a ProblemSpec,
        h: f64,
        refine: usize,
        seed: u64,
        path: u64,
        noise: Noise,
        reference: ReferenceExit,
    ) -> Self {
        let d = p.dim;
        let k = refine.max(1);
        let dt = h / k as f64;
        Self {
            p,
            h,
            k,
            dt,
            sqdt: dt.sqrt(),
            rng: PathRng::new(seed, path, noise),
            evolve_coarse: true,
            evolve_fine: refine > 1,
            want_interp: false,
            reference,
            node: 0,
            coarse: p.x0.clone(),
            fine: p.x0.clone(),
            w: vec![0.0; d],
            fine_exit: None,
            fault: false,
            dw: vec![0.0; d],
            z: vec![0.0; d],
            mu: vec![0.0; d],
            sig: vec![0.0; d * d],
            mu_c: vec![0.0; d],
            sig_c: vec![0.0; d * d],
            prev: vec![0.0; d],
            interp: Vec::new(),
            exit_buf: vec![0.0; d],
        }
    }

    /// Only the Brownian path moves.
    pub fn brownian_only(mut self) -> Self {
        self.evolve_coarse = false;
        self.evolve_fine = false;
        self
    }

    /// Keep the fine chain even at `refine = 1`, for observers that need
    /// per-step fine views.
    pub fn with_fine(mut self) -> Self {
        self.evolve_fine = true;
        self
    }

    pub fn with_interpolation(mut self) -> Self {
        self.want_interp = true;
        self.interp = vec![0.0; self.p.dim];
        self
    }

    pub fn refine(&self) -> usize {
        self.k
    }

    pub fn time(&self) -> f64 {
        self.node as f64 * self.h
    }

    pub fn step(&mut self) {
        self.step_with(|_| {});
    }

    /// Advance one coarse step, calling `obs` after every fine sub-step.
    pub fn step_with(&mut self, mut obs: impl FnMut(&FineView)) {
        let d = self.p.dim;
        let t0 = self.node as f64 * self.h;
        self.dw.fill(0.0);
        if self.evolve_coarse {
            (self.p.drift)(&self.coarse, &mut self.mu_c);
            (self.p.diffusion)(&self.coarse, &mut self.sig_c);
        }
        for sub in 1..=self.k {
            for j in 0..d {
                self.z[j] = self.sqdt * self.rng.normal();
                self.dw[j] += self.z[j];
                self.w[j] += self.z[j];
            }
            let t = if sub == self.k { t0 + self.h } else { t0 + self.h * (sub as f64 / self.k as f64) };
            if !self.evolve_fine {
                continue;
            }
            (self.p.drift)(&self.fine, &mut self.mu);
            (self.p.diffusion)(&self.fine, &mut self.sig);
            self.prev.copy_from_slice(&self.fine);
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += self.sig[i * d + j] * self.z[j];
                }
                self.fine[i] += self.mu[i] * self.dt + s;
            }
            let mut exited_now = false;
            if self.fine_exit.is_none() {
                let dom = &self.p.domain;
                if !dom.contains(&self.fine) {
                    let th = dom.segment_exit_fraction(&self.prev, &self.fine);
                    let te = match self.reference {
                        ReferenceExit::Bridge => t - self.dt + th * self.dt,
                        ReferenceExit::Grid => t,
                    };
                    for i in 0..d {
                        self.exit_buf[i] = match self.reference {
                            ReferenceExit::Bridge => self.prev[i] + th * (self.fine[i] - self.prev[i]),
                            ReferenceExit::Grid => self.fine[i],
                        };
                    }
                    self.fine_exit = Some((te, self.exit_buf.clone()));
                    exited_now = true;
                } else if self.reference == ReferenceExit::Bridge {
                    let pc = dom.bridge_crossing_probability(&self.prev, &self.fine, &self.sig, self.dt);
                    if pc > 0.0 && self.rng.uniform() < pc {
                        let mid: Vec<f64> =
                            self.prev.iter().zip(&self.fine).map(|(a, b)| 0.5 * (a + b)).collect();
                        self.fine_exit = Some((t - 0.5 * self.dt, dom.project_to_boundary(&mid)));
                        exited_now = true;
                    }
                }
            }
            if self.want_interp {
                let frac = if sub == self.k { self.h } else { self.h * (sub as f64 / self.k as f64) };
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..d {
                        s += self.sig_c[i * d + j] * self.dw[j];
                    }
                    self.interp[i] = self.coarse[i] + self.mu_c[i] * frac + s;
                }
            }
            let exit = if exited_now {
                self.fine_exit.as_ref().map(|(t, x)| (*t, x.as_slice()))
            } else {
                None
            };
            obs(&FineView { t, sub, fine: &self.fine, interp: &self.interp, exit });
        }
        if self.evolve_coarse {
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += self.sig_c[i * d + j] * self.dw[j];
                }
                self.coarse[i] += self.mu_c[i] * self.h + s;
            }
            if !self.coarse.iter().all(|v| v.is_finite()) {
                self.fault = true;
            }
        }
        if self.evolve_fine && !self.fine.iter().all(|v| v.is_finite()) {
            self.fault = true;
        }
        self.node += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Domain, ProblemSpec};

    fn bm() -> ProblemSpec {
        ProblemSpec::builder("bm", Domain::interval(-1.0, 1.0), vec![0.0]).build().unwrap()
    }

    #[test]
    fn coarse_increment_is_sum_of_fine() {
        let p = bm();
        let mut s = Stepper::new(&p, 0.1, 8, 5, 0, Noise::Gaussian, ReferenceExit::Grid);
        let mut total = 0.0;
        s.step_with(|_| {});
        // With identity noise and zero drift both chains equal x0 + W.
        total += s.w[0];
        assert_eq!(s.coarse[0], total);
        assert!((s.fine[0] - total).abs() < 1e-15);
    }

    #[test]
    fn brownian_replay_matches() {
        let p = bm();
        let mut a = Stepper::new(&p, 0.05, 4, 9, 2, Noise::Gaussian, ReferenceExit::Bridge);
        let mut b = Stepper::new(&p, 0.05, 4, 9, 2, Noise::Gaussian, ReferenceExit::Bridge).brownian_only();
        for _ in 0..50 {
            a.step();
            b.step();
        }
        assert_eq!(a.w, b.w);
    }
}
