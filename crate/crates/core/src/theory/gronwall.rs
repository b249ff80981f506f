use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::stream;

/// Finite Markov chain on the grid `{0, h, ..., N h}`, stopped at the
/// first visit to an absorbing state or at node `N`.
///
/// `a[n][s]`, `b[n][s]` are the sequences evaluated in state `s` at node
/// `n`; `xi[s]` is the terminal value wherever the chain stops. After the
/// stop `A` equals `xi`, which the enumeration enforces by reading `xi`
/// instead of `a` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteChain {
    pub states: usize,
    pub h: f64,
    /// One row-major `states × states` matrix per step `n -> n+1`.
    pub transitions: Vec<Vec<f64>>,
    pub absorbing: Vec<bool>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
}

impl FiniteChain {
    /// Last node `N`.
    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.states;
        let n = self.horizon();
        if s == 0 || n == 0 || !(self.h > 0.0) {
            return invalid("chain needs states, steps and h > 0");
        }
        if self.absorbing.len() != s || self.xi.len() != s {
            return invalid("absorbing flags and terminal values need one entry per state");
        }
        if self.a.len() != n + 1 || self.b.len() != n + 1 || self.a.iter().chain(&self.b).any(|r| r.len() != s) {
            return invalid("A and B need one row of length `states` per node");
        }
        if self.a.iter().chain(&self.b).flatten().chain(&self.xi).any(|v| !(*v >= 0.0)) {
            return invalid("A, B and xi must be nonnegative");
        }
        for (k, m) in self.transitions.iter().enumerate() {
            if m.len() != s * s {
                return invalid(format!("transition {k} has the wrong size"));
            }
            for i in 0..s {
                let row = &m[i * s..(i + 1) * s];
                if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return invalid(format!("row {i} of transition {k} is not a probability vector"));
                }
                if self.absorbing[i] && (row[i] - 1.0).abs() > 1e-15 {
                    return invalid(format!("absorbing state {i} leaves at step {k}"));
                }
            }
        }
        Ok(())
    }

    fn stopped(&self, n: usize, s: usize) -> bool {
        n == self.horizon() || self.absorbing[s]
    }

    fn a_at(&self, n: usize, s: usize) -> f64 {
        if self.stopped(n, s) {
            self.xi[s]
        } else {
            self.a[n][s]
        }
    }

    fn expect_next(&self, n: usize, s: usize, v: impl Fn(usize) -> f64) -> f64 {
        let k = self.states;
        let row = &self.transitions[n][s * k..(s + 1) * k];
        row.iter().enumerate().map(|(j, p)| p * v(j)).sum()
    }
}

/// Where the `B` sum of the conclusion starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GronwallSum {
    /// `sum_{l = t}^{tau - h}`.
    #[default]
    IncludeCurrent,
    /// `sum_{l = t + h}^{tau - h}`.
    ExcludeCurrent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GronwallVerdict {
    Holds,
    Violated,
    /// The hypothesis inequality fails somewhere, so nothing is claimed.
    Precondition,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub node: usize,
    pub state: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub verdict: GronwallVerdict,
    /// Non-stopped `(node, state)` pairs compared.
    pub checked: usize,
    /// Smallest `rhs - lhs` over the checked pairs.
    pub min_slack: f64,
    pub witness: Option<Witness>,
}

const REL_TOL: f64 = 1e-12;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + REL_TOL * rhs.abs().max(1.0)
}

/// Checks `A_t <= C E_t[A_{t+h}] + K h B_t` on every non-stopped pair, then
/// compares `A_t` with `E_t[C^{(tau-t)/h} xi + K h sum C^{(l-t)/h} B_l]`
/// computed by backward recursion.
pub fn discrete_gronwall_verify(chain: &FiniteChain, c: f64, k: f64, sum: GronwallSum) -> Result<GronwallReport> {
    chain.validate()?;
    if !(c > 0.0) || !(k >= 0.0) {
        return invalid(format!("need C > 0 and K >= 0, got C={c}, K={k}"));
    }
    let n_max = chain.horizon();
    let s = chain.states;
    for n in 0..n_max {
        for i in 0..s {
            if chain.stopped(n, i) {
                continue;
            }
            let lhs = chain.a[n][i];
            let rhs = c * chain.expect_next(n, i, |j| chain.a_at(n + 1, j)) + k * chain.h * chain.b[n][i];
            if exceeds(lhs, rhs) {
                return Ok(GronwallReport {
                    verdict: GronwallVerdict::Precondition,
                    checked: 0,
                    min_slack: rhs - lhs,
                    witness: Some(Witness { node: n, state: i, lhs, rhs }),
                });
            }
        }
    }
    // r[n][i]: conclusion with the sum starting at the current node.
    let mut r = vec![vec![0.0; s]; n_max + 1];
    r[n_max].copy_from_slice(&chain.xi);
    for n in (0..n_max).rev() {
        for i in 0..s {
            r[n][i] = if chain.stopped(n, i) {
                chain.xi[i]
            } else {
                k * chain.h * chain.b[n][i] + c * chain.expect_next(n, i, |j| r[n + 1][j])
            };
        }
    }
    let mut checked = 0;
    let mut min_slack = f64::INFINITY;
    let mut witness = None;
    for n in 0..n_max {
        for i in 0..s {
            if chain.stopped(n, i) {
                continue;
            }
            let lhs = chain.a[n][i];
            let rhs = match sum {
                GronwallSum::IncludeCurrent => r[n][i],
                GronwallSum::ExcludeCurrent => c * chain.expect_next(n, i, |j| r[n + 1][j]),
            };
            checked += 1;
            min_slack = min_slack.min(rhs - lhs);
            if witness.is_none() && exceeds(lhs, rhs) {
                witness = Some(Witness { node: n, state: i, lhs, rhs });
            }
        }
    }
    let verdict = if witness.is_some() { GronwallVerdict::Violated } else { GronwallVerdict::Holds };
    Ok(GronwallReport { verdict, checked, min_slack, witness })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub c: f64,
    pub k: f64,
}

/// Random chain satisfying the hypothesis by construction: Dirichlet(1)
/// rows, exponential `B` and `xi`, and `A` defined backward as the
/// hypothesis right-hand side scaled down by a random factor in `(0, 1]`.
pub fn random_chain(states: usize, seed: u64, index: u64) -> (FiniteChain, ChainParams) {
    let mut rng = stream(seed, index);
    let steps = rng.gen_range(2..=12);
    let h = 0.1;
    let c = rng.gen_range(0.5..1.5);
    let k = rng.gen_range(0.0..2.0);
    let mut absorbing: Vec<bool> = (0..states).map(|_| rng.gen_bool(0.3)).collect();
    absorbing[0] = false;
    let mut transitions = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut m = vec![0.0; states * states];
        for i in 0..states {
            if absorbing[i] {
                m[i * states + i] = 1.0;
                continue;
            }
            let e: Vec<f64> = (0..states).map(|_| Exp1.sample(&mut rng)).collect();
            let tot: f64 = e.iter().sum();
            for j in 0..states {
                m[i * states + j] = e[j] / tot;
            }
            // Keep each row an exact probability vector.
            let rest: f64 = (0..states).filter(|&j| j != i).map(|j| m[i * states + j]).sum();
            m[i * states + i] = 1.0 - rest;
        }
        transitions.push(m);
    }
    let b: Vec<Vec<f64>> = (0..=steps).map(|_| (0..states).map(|_| Exp1.sample(&mut rng)).collect()).collect();
    let xi: Vec<f64> = (0..states).map(|_| Exp1.sample(&mut rng)).collect();
    let mut chain = FiniteChain { states, h, transitions, absorbing, a: vec![vec![0.0; states]; steps + 1], b, xi };
    chain.a[steps].copy_from_slice(&chain.xi);
    for n in (0..steps).rev() {
        for i in 0..states {
            if chain.absorbing[i] {
                chain.a[n][i] = chain.xi[i];
                continue;
            }
            let eq = c * chain.expect_next(n, i, |j| chain.a_at(n + 1, j)) + k * h * chain.b[n][i];
            let shrink = if rng.gen_bool(0.3) { 1.0 } else { rng.gen_range(0.0..1.0) };
            chain.a[n][i] = eq * shrink;
        }
    }
    (chain, ChainParams { c, k })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallBatch {
    pub chains: usize,
    pub violations: usize,
    pub preconditions: usize,
    pub first_violation: Option<(usize, Witness)>,
}

/// Verifies `count` random chains in parallel.
pub fn gronwall_batch(count: usize, states: usize, seed: u64) -> Result<GronwallBatch> {
    let reports: Vec<GronwallReport> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (chain, prm) = random_chain(states, seed, i as u64);
            discrete_gronwall_verify(&chain, prm.c, prm.k, GronwallSum::IncludeCurrent)
        })
        .collect::<Result<_>>()?;
    let mut out = GronwallBatch { chains: count, violations: 0, preconditions: 0, first_violation: None };
    for (i, r) in reports.iter().enumerate() {
        match r.verdict {
            GronwallVerdict::Holds => {}
            GronwallVerdict::Violated => {
                out.violations += 1;
                if out.first_violation.is_none() {
                    out.first_violation = r.witness.map(|w| (i, w));
                }
            }
            GronwallVerdict::Precondition => out.preconditions += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(rho: f64, steps: usize) -> FiniteChain {
        FiniteChain {
            states: 1,
            h: 1.0,
            transitions: vec![vec![1.0]; steps],
            absorbing: vec![false],
            a: (0..=steps).map(|n| vec![rho.powi(n as i32)]).collect(),
            b: vec![vec![0.0]; steps + 1],
            xi: vec![rho.powi(steps as i32)],
        }
    }

    #[test]
    fn geometric_recursion_is_tight() {
        let ch = geometric(0.8, 6);
        let r = discrete_gronwall_verify(&ch, 1.0 / 0.8, 0.0, GronwallSum::IncludeCurrent).unwrap();
        assert_eq!(r.verdict, GronwallVerdict::Holds);
        assert!(r.min_slack.abs() < 1e-12);
    }

    #[test]
    fn excluding_current_term_fails_when_b_is_active() {
        let ch = FiniteChain {
            states: 1,
            h: 1.0,
            transitions: vec![vec![1.0]],
            absorbing: vec![false],
            a: vec![vec![1.0], vec![0.0]],
            b: vec![vec![1.0], vec![0.0]],
            xi: vec![0.0],
        };
        let inc = discrete_gronwall_verify(&ch, 1.0, 1.0, GronwallSum::IncludeCurrent).unwrap();
        assert_eq!(inc.verdict, GronwallVerdict::Holds);
        let exc = discrete_gronwall_verify(&ch, 1.0, 1.0, GronwallSum::ExcludeCurrent).unwrap();
        assert_eq!(exc.verdict, GronwallVerdict::Violated);
    }

    #[test]
    fn broken_hypothesis_is_a_precondition() {
        let mut ch = geometric(0.8, 3);
        ch.a[1][0] = 5.0;
        let r = discrete_gronwall_verify(&ch, 1.0, 0.0, GronwallSum::IncludeCurrent).unwrap();
        assert_eq!(r.verdict, GronwallVerdict::Precondition);
    }

    #[test]
    fn random_chains_are_valid() {
        for i in 0..20 {
            let (ch, _) = random_chain(3, 1, i);
            ch.validate().unwrap();
        }
    }
}
