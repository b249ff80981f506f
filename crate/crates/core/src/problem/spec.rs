use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{invalid, Result};
use crate::rng::stream;

/// `x -> out`, with `out` of length d (drift) or d*d row-major (diffusion).
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Generator `f(x, y)`.
pub type GeneratorFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Declared Lipschitz constants and `sup_x |f(x, 0)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub l_mu: f64,
    pub l_sigma: f64,
    pub l_f: f64,
    pub l_g: f64,
    pub sup_f0: f64,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub drift: VectorFn,
    pub diffusion: VectorFn,
    pub generator: GeneratorFn,
    pub boundary: ScalarFn,
    pub domain: Domain,
    pub x0: Vec<f64>,
    pub constants: Constants,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("x0", &self.x0)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn builder(name: impl Into<String>, domain: Domain, x0: Vec<f64>) -> ProblemBuilder {
        let d = domain.dim();
        ProblemBuilder {
            spec: ProblemSpec {
                name: name.into(),
                dim: d,
                drift: Arc::new(|_, out: &mut [f64]| out.fill(0.0)),
                diffusion: Arc::new(move |_, out: &mut [f64]| {
                    out.fill(0.0);
                    for i in 0..d {
                        out[i * d + i] = 1.0;
                    }
                }),
                generator: Arc::new(|_, _| 0.0),
                boundary: Arc::new(|_| 0.0),
                domain,
                x0,
                constants: Constants { l_mu: 0.0, l_sigma: 0.0, l_f: 1.0, l_g: 0.0, sup_f0: 0.0 },
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.dim == 0 || self.domain.dim() != self.dim {
            return invalid(format!("dimension {} does not match the domain", self.dim));
        }
        if self.x0.len() != self.dim || !self.domain.contains(&self.x0) {
            return invalid(format!("start point {:?} is not inside the domain", self.x0));
        }
        let c = &self.constants;
        let all = [c.l_mu, c.l_sigma, c.l_f, c.l_g, c.sup_f0];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid(format!("constants must be finite and nonnegative: {c:?}"));
        }
        if !(c.l_f > 0.0) {
            return invalid("generator Lipschitz constant L_f must be positive");
        }
        Ok(())
    }

    /// Same problem started from `x0`.
    pub fn with_start(&self, x0: Vec<f64>) -> Result<Self> {
        let mut p = self.clone();
        p.x0 = x0;
        p.validate()?;
        Ok(p)
    }

    pub fn with_constants(&self, constants: Constants) -> Result<Self> {
        let mut p = self.clone();
        p.constants = constants;
        p.validate()?;
        Ok(p)
    }
}

pub struct ProblemBuilder {
    spec: ProblemSpec,
}

impl ProblemBuilder {
    pub fn drift(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.spec.drift = Arc::new(f);
        self
    }

    pub fn diffusion(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.spec.diffusion = Arc::new(f);
        self
    }

    pub fn generator(mut self, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.spec.generator = Arc::new(f);
        self
    }

    pub fn boundary(mut self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.spec.boundary = Arc::new(g);
        self
    }

    pub fn constants(mut self, c: Constants) -> Self {
        self.spec.constants = c;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        self.spec.validate()?;
        Ok(self.spec)
    }
}

/// Largest secant slopes seen for each coefficient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub observed: Constants,
    pub warnings: Vec<String>,
}

/// Random secant probe of the declared constants over the domain inflated
/// by 2 in every direction. `f` is probed in `y` on `[-y_range, y_range]`
/// and `sup_f0` over the same sample points. A warning is raised when an
/// observed value exceeds its declared counterpart by more than 1%.
pub fn probe_lipschitz(p: &ProblemSpec, pairs: usize, y_range: f64, seed: u64) -> LipschitzProbe {
    let d = p.dim;
    let (lo, hi) = p.domain.bounding_box();
    let mut rng = stream(seed, u64::MAX);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..d).map(|i| rng.gen_range(lo[i] - 2.0..hi[i] + 2.0)).collect()
    };
    let mut obs = Constants { l_mu: 0.0, l_sigma: 0.0, l_f: 0.0, l_g: 0.0, sup_f0: 0.0 };
    let (mut m1, mut m2) = (vec![0.0; d], vec![0.0; d]);
    let (mut s1, mut s2) = (vec![0.0; d * d], vec![0.0; d * d]);
    for _ in 0..pairs {
        let x = point(&mut rng);
        let z = point(&mut rng);
        let dx = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dx == 0.0 {
            continue;
        }
        (p.drift)(&x, &mut m1);
        (p.drift)(&z, &mut m2);
        (p.diffusion)(&x, &mut s1);
        (p.diffusion)(&z, &mut s2);
        let dm = m1.iter().zip(&m2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let ds = s1.iter().zip(&s2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        obs.l_mu = obs.l_mu.max(dm / dx);
        obs.l_sigma = obs.l_sigma.max(ds / dx);
        obs.l_g = obs.l_g.max(((p.boundary)(&x) - (p.boundary)(&z)).abs() / dx);
        let y1 = rng.gen_range(-y_range..y_range);
        let y2 = rng.gen_range(-y_range..y_range);
        if y1 != y2 {
            let df = ((p.generator)(&x, y1) - (p.generator)(&x, y2)).abs();
            obs.l_f = obs.l_f.max(df / (y1 - y2).abs());
        }
        obs.sup_f0 = obs.sup_f0.max((p.generator)(&x, 0.0).abs());
    }
    let c = p.constants;
    let mut warnings = Vec::new();
    for (name, seen, declared) in [
        ("L_mu", obs.l_mu, c.l_mu),
        ("L_sigma", obs.l_sigma, c.l_sigma),
        ("L_f", obs.l_f, c.l_f),
        ("L_g", obs.l_g, c.l_g),
        ("sup|f(.,0)|", obs.sup_f0, c.sup_f0),
    ] {
        if seen > 1.01 * declared {
            warnings.push(format!("{name}: observed {seen:.6} exceeds declared {declared:.6}"));
        }
    }
    LipschitzProbe { observed: obs, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brownian() -> ProblemBuilder {
        ProblemSpec::builder("bm", Domain::interval(-1.0, 1.0), vec![0.0])
    }

    #[test]
    fn start_outside_rejected() {
        let b = ProblemSpec::builder("bm", Domain::interval(-1.0, 1.0), vec![1.0]);
        assert!(b.build().is_err());
    }

    #[test]
    fn nonpositive_lf_rejected() {
        let c = Constants { l_mu: 0.0, l_sigma: 0.0, l_f: 0.0, l_g: 0.0, sup_f0: 0.0 };
        assert!(brownian().constants(c).build().is_err());
    }

    #[test]
    fn probe_flags_understated_constant() {
        let c = Constants { l_mu: 0.0, l_sigma: 0.0, l_f: 0.5, l_g: 0.0, sup_f0: 0.0 };
        let p = brownian().generator(|_, y| 2.0 * y).constants(c).build().unwrap();
        let probe = probe_lipschitz(&p, 200, 5.0, 1);
        assert!((probe.observed.l_f - 2.0).abs() < 1e-9);
        assert!(probe.warnings.iter().any(|w| w.starts_with("L_f")));
    }
}
