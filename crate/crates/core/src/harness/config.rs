use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    validate_moment_budget, validate_stepsize, BenchmarkId, BenchmarkProblem, BudgetVerdict, Constants, Domain,
    MomentBudget, ProblemSpec, ScalarFn, StepsizeVerdict,
};

/// One experiment, read from a TOML file.
///
/// ```toml
/// name = "b1-rates"
/// seed = 7
/// h = [0.2, 0.1, 0.05, 0.025]
/// n_paths = 100000
/// refine = 16
///
/// [problem]
/// benchmark = "B1"
///
/// [truncation]
/// policy = "explicit"
/// t = 12.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub problem: ProblemRef,
    pub h: Vec<f64>,
    pub n_paths: usize,
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default)]
    pub moments: MomentConfig,
    #[serde(default)]
    pub checks: CheckConfig,
    #[serde(default)]
    pub windows: Windows,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_refine() -> usize {
    16
}

/// A catalog benchmark or an inline problem with constant coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemRef {
    #[serde(default)]
    pub benchmark: Option<BenchmarkChoice>,
    #[serde(default)]
    pub inline: Option<InlineProblem>,
    /// Replaces individual declared constants.
    #[serde(default)]
    pub constants: Option<ConstantOverrides>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchmarkChoice {
    /// Catalog defaults, e.g. `"B1"`.
    Name(String),
    /// Explicit parameters, e.g. `{ id = "B1", lambda = 0.2, half_width = 1.0 }`.
    Params(BenchmarkId),
}

/// Affine coefficients `mu(x) = drift + drift_matrix x` and
/// `sigma_ij(x) = diffusion_ij + sum_k diffusion_gradient[(i d + j) d + k] x_k`,
/// `f(x, y) = slope y + intercept` and `g(x) = coeffs . x + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub domain: Domain,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    /// Row-major `d × d`.
    #[serde(default)]
    pub drift_matrix: Option<Vec<f64>>,
    /// Row-major `d × d`; identity when absent.
    #[serde(default)]
    pub diffusion: Option<Vec<f64>>,
    #[serde(default)]
    pub diffusion_gradient: Option<Vec<f64>>,
    #[serde(default)]
    pub generator: AffineGenerator,
    #[serde(default)]
    pub boundary: Option<AffineBoundary>,
    pub constants: Constants,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineGenerator {
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineBoundary {
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub l_mu: Option<f64>,
    pub l_sigma: Option<f64>,
    pub l_f: Option<f64>,
    pub l_g: Option<f64>,
    pub sup_f0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruncationPolicy {
    /// Markov bound when `m_bound` is given and the budget is feasible,
    /// otherwise `factor` times the empirical `level` quantile of a pilot
    /// run censored at `pilot_t_max`.
    Auto {
        #[serde(default)]
        m_bound: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_level")]
        level: f64,
        #[serde(default = "default_factor")]
        factor: f64,
        #[serde(default = "default_pilot_t")]
        pilot_t_max: f64,
        #[serde(default = "default_pilot_n")]
        pilot_paths: usize,
    },
    Explicit { t: f64 },
}

fn default_tol() -> f64 {
    1e-6
}
fn default_level() -> f64 {
    0.999
}
fn default_factor() -> f64 {
    2.0
}
fn default_pilot_t() -> f64 {
    50.0
}
fn default_pilot_n() -> usize {
    10_000
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::Auto {
            m_bound: None,
            tol: default_tol(),
            level: default_level(),
            factor: default_factor(),
            pilot_t_max: default_pilot_t(),
            pilot_paths: default_pilot_n(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub quadrature: bool,
    pub picard: bool,
    pub mesh_points: usize,
    pub gh_order: usize,
    pub bins: usize,
    pub picard_max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { quadrature: true, picard: false, mesh_points: 401, gh_order: 16, bins: 32, picard_max_iterations: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub q1: f64,
    pub q2: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentConfig {
    pub enabled: bool,
    /// Explicit exponents; when empty, `fractions` of the 1D threshold of
    /// an interval domain are used.
    pub m_values: Vec<f64>,
    pub fractions: Vec<f64>,
    pub freidlin: bool,
    pub alpha: f64,
    pub powers: Vec<u32>,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            m_values: Vec::new(),
            fractions: vec![0.25, 0.5, 1.5],
            freidlin: true,
            alpha: 0.25,
            powers: vec![1, 2, 3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub gronwall: bool,
    pub gronwall_chains: usize,
    pub kolmogorov: bool,
    pub em_slope: bool,
    pub two_stopping: bool,
    /// Paths for the statistical checks.
    pub n_paths: usize,
    pub refine: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            gronwall: true,
            gronwall_chains: 100,
            kolmogorov: true,
            em_slope: true,
            two_stopping: true,
            n_paths: 20_000,
            refine: 8,
        }
    }
}

/// Acceptance windows; `[lo, hi]` pairs are inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windows {
    pub e1_slope_min: f64,
    pub exit_gap_slope: [f64; 2],
    pub em_order_fixed: [f64; 2],
    pub em_order_stopped: [f64; 2],
    pub kolmogorov_alpha: [f64; 2],
}

impl Default for Windows {
    fn default() -> Self {
        Self {
            e1_slope_min: 0.3,
            exit_gap_slope: [0.35, 0.65],
            em_order_fixed: [0.4, 0.6],
            em_order_stopped: [0.35, 0.65],
            kolmogorov_alpha: [0.45, 0.55],
        }
    }
}

/// A resolved problem and, for benchmarks, its closed-form solution.
#[derive(Clone)]
pub struct ResolvedProblem {
    pub problem: Arc<ProblemSpec>,
    pub solution: Option<ScalarFn>,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub problem: String,
    pub stepsizes: Vec<StepsizeVerdict>,
    pub budget: Option<BudgetVerdict>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_problem(&self) -> Result<ResolvedProblem> {
        let (mut spec, solution, label) = match (&self.problem.benchmark, &self.problem.inline) {
            (Some(choice), None) => {
                let id = match choice {
                    BenchmarkChoice::Name(n) => BenchmarkId::parse(n)?,
                    BenchmarkChoice::Params(id) => *id,
                };
                let b = BenchmarkProblem::new(id)?;
                ((*b.problem).clone(), Some(b.solution), id.label().to_string())
            }
            (None, Some(inline)) => (inline.build(&self.name)?, None, "inline".to_string()),
            _ => return Err(Error::Config("problem needs exactly one of `benchmark` or `inline`".into())),
        };
        if let Some(o) = self.problem.constants {
            let mut c = spec.constants;
            c.l_mu = o.l_mu.unwrap_or(c.l_mu);
            c.l_sigma = o.l_sigma.unwrap_or(c.l_sigma);
            c.l_f = o.l_f.unwrap_or(c.l_f);
            c.l_g = o.l_g.unwrap_or(c.l_g);
            c.sup_f0 = o.sup_f0.unwrap_or(c.sup_f0);
            spec = spec.with_constants(c)?;
        }
        Ok(ResolvedProblem { problem: Arc::new(spec), solution, label })
    }

    /// Structural checks plus the stepsize condition for every `h`.
    pub fn validate(&self) -> Result<ValidationSummary> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return cfg(format!("experiment name {:?} must be non-empty without path separators", self.name));
        }
        if self.h.is_empty() {
            return cfg("the h list is empty".into());
        }
        if self.h.iter().any(|h| !(*h > 0.0)) || self.h.windows(2).any(|w| w[1] >= w[0]) {
            return cfg(format!("h list must be positive and strictly decreasing, got {:?}", self.h));
        }
        if self.n_paths == 0 {
            return cfg("n_paths must be positive".into());
        }
        if self.refine < 2 {
            return cfg("refine must be at least 2 for the fine reference".into());
        }
        match self.truncation {
            TruncationPolicy::Explicit { t } if !(t > 0.0) => return cfg(format!("explicit horizon {t} must be positive")),
            TruncationPolicy::Auto { tol, level, factor, pilot_t_max, pilot_paths, .. }
                if !(tol > 0.0) || !(0.0..1.0).contains(&level) || !(factor >= 1.0) || !(pilot_t_max > 0.0) || pilot_paths == 0 =>
            {
                return cfg("auto truncation needs tol > 0, level in [0, 1), factor >= 1 and a pilot".into())
            }
            _ => {}
        }
        let r = self.resolve_problem()?;
        let l_f = r.problem.constants.l_f;
        let mut stepsizes = Vec::with_capacity(self.h.len());
        for &h in &self.h {
            let v = validate_stepsize(h, l_f)?;
            if let Some(viol) = v.violation {
                return cfg(format!("h = {h} violates the stepsize condition ({viol}) for L_f = {l_f}"));
            }
            stepsizes.push(v);
        }
        let budget = match self.budget {
            Some(b) => {
                let c = r.problem.constants;
                Some(validate_moment_budget(&MomentBudget {
                    d: r.problem.dim,
                    l_mu: c.l_mu,
                    l_sigma: c.l_sigma,
                    l_f: c.l_f,
                    q1: b.q1,
                    q2: b.q2,
                    rho: b.rho,
                })?)
            }
            None => None,
        };
        Ok(ValidationSummary { problem: r.label, stepsizes, budget })
    }
}

impl InlineProblem {
    fn build(&self, name: &str) -> Result<ProblemSpec> {
        let d = self.domain.dim();
        let bad = |m: &str| Err(Error::Config(format!("inline problem: {m}")));
        if self.x0.len() != d {
            return bad("x0 has the wrong dimension");
        }
        let drift = self.drift.clone().unwrap_or_else(|| vec![0.0; d]);
        if drift.len() != d {
            return bad("drift must have d entries");
        }
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = 1.0;
        }
        let sigma = self.diffusion.clone().unwrap_or(sigma);
        if sigma.len() != d * d {
            return bad("diffusion must have d*d entries");
        }
        let a = self.drift_matrix.clone().unwrap_or_else(|| vec![0.0; d * d]);
        let grad = self.diffusion_gradient.clone().unwrap_or_else(|| vec![0.0; d * d * d]);
        if a.len() != d * d || grad.len() != d * d * d {
            return bad("drift_matrix needs d*d and diffusion_gradient d*d*d entries");
        }
        let AffineGenerator { slope, intercept } = self.generator;
        let (coeffs, offset) = match &self.boundary {
            Some(b) if b.coeffs.len() != d => return bad("boundary coefficients must have d entries"),
            Some(b) => (b.coeffs.clone(), b.offset),
            None => (vec![0.0; d], 0.0),
        };
        ProblemSpec::builder(name, self.domain.clone(), self.x0.clone())
            .drift(move |x, out| {
                for i in 0..d {
                    out[i] = drift[i] + (0..d).map(|k| a[i * d + k] * x[k]).sum::<f64>();
                }
            })
            .diffusion(move |x, out| {
                for e in 0..d * d {
                    out[e] = sigma[e] + (0..d).map(|k| grad[e * d + k] * x[k]).sum::<f64>();
                }
            })
            .generator(move |_, y| slope * y + intercept)
            .boundary(move |x| offset + coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .constants(self.constants)
            .build()
    }
}
