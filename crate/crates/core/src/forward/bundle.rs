use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stepper::{ReferenceExit, Stepper};
use crate::error::{invalid, Result};
use crate::problem::{GridSpec, ProblemSpec};
use crate::rng::Noise;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    /// Exit records only.
    #[default]
    Exits,
    /// Also the coarse states and Brownian values at every node up to the
    /// (truncated) exit.
    Nodes,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Fine steps per coarse step; 1 means no fine reference.
    pub refine: usize,
    pub reference_exit: ReferenceExit,
    pub storage: Storage,
    pub noise: Noise,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { refine: 1, reference_exit: ReferenceExit::Bridge, storage: Storage::Exits, noise: Noise::Gaussian }
    }
}

/// Node-major storage. Paths are permuted by decreasing truncated exit
/// index, so the paths still present at node `n` are a prefix of `order`.
#[derive(Clone, Debug)]
pub struct NodeStore {
    pub d: usize,
    /// `order[r]` is the path at rank `r`.
    pub order: Vec<u32>,
    pub rank: Vec<u32>,
    /// `counts[n]`: paths with truncated exit index at least `n`.
    pub counts: Vec<usize>,
    pub offsets: Vec<usize>,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl NodeStore {
    pub fn nodes(&self) -> usize {
        self.counts.len()
    }

    /// State of the path at rank `r` on node `n`.
    #[inline]
    pub fn state(&self, n: usize, r: usize) -> &[f64] {
        let o = (self.offsets[n] + r) * self.d;
        &self.x[o..o + self.d]
    }

    #[inline]
    pub fn brownian(&self, n: usize, r: usize) -> &[f64] {
        let o = (self.offsets[n] + r) * self.d;
        &self.w[o..o + self.d]
    }

    /// All states on node `n`, rank-ordered.
    pub fn slab(&self, n: usize) -> &[f64] {
        let a = self.offsets[n] * self.d;
        &self.x[a..a + self.counts[n] * self.d]
    }
}

/// A batch of simulated paths with their exit records.
#[derive(Clone, Debug)]
pub struct PathBundle {
    pub problem: Arc<ProblemSpec>,
    pub grid: GridSpec,
    pub seed: u64,
    pub n_paths: usize,
    pub options: SimOptions,
    /// Coarse exit node; `None` when censored at `t_max`.
    pub exits: Vec<Option<u32>>,
    /// Coarse state at the truncated exit, row-major n×d.
    pub xi_states: Vec<f64>,
    /// Reference exit time of the fine chain; `None` when censored or
    /// when there is no fine chain.
    pub fine_exits: Vec<Option<f64>>,
    /// Fine state at the reference exit (or at `t_max`).
    pub fine_states: Vec<f64>,
    pub faults: Vec<bool>,
    /// Truncated exit node `min(exit, t_max / h)`; for faulted paths the
    /// last node before the fault.
    pub lasts: Vec<u32>,
    pub store: Option<NodeStore>,
}

struct Record {
    exit: Option<u32>,
    last: u32,
    xi: Vec<f64>,
    fine_exit: Option<f64>,
    fine_state: Vec<f64>,
    fault: bool,
    x: Vec<f64>,
    w: Vec<f64>,
}

fn simulate_one(p: &ProblemSpec, grid: &GridSpec, opts: &SimOptions, seed: u64, i: usize) -> Record {
    let coupled = opts.refine > 1;
    let keep = opts.storage == Storage::Nodes;
    let n_max = grid.nodes();
    let mut st = Stepper::new(p, grid.h, opts.refine, seed, i as u64, opts.noise, opts.reference_exit);
    let mut x = Vec::new();
    let mut w = Vec::new();
    if keep {
        x.extend_from_slice(&st.coarse);
        w.extend_from_slice(&st.w);
    }
    let mut exit = None;
    let mut last = 0u32;
    let mut xi = st.coarse.clone();
    let mut coarse_done = false;
    let mut fault = false;
    while st.node < n_max && !(coarse_done && (!coupled || st.fine_exit.is_some())) {
        st.step();
        if st.fault {
            fault = true;
            break;
        }
        if !coarse_done {
            last = st.node as u32;
            xi.copy_from_slice(&st.coarse);
            if keep {
                x.extend_from_slice(&st.coarse);
                w.extend_from_slice(&st.w);
            }
            if !p.domain.contains(&st.coarse) {
                exit = Some(st.node as u32);
                coarse_done = true;
            }
        }
    }
    let (fine_exit, fine_state) = match (&st.fine_exit, coupled) {
        (Some((t, s)), true) if *t <= grid.t_max => (Some(*t), s.clone()),
        _ => (None, if coupled { st.fine.clone() } else { Vec::new() }),
    };
    Record { exit, last, xi, fine_exit, fine_state, fault, x, w }
}

impl PathBundle {
    pub fn simulate(problem: Arc<ProblemSpec>, grid: GridSpec, n_paths: usize, seed: u64, options: SimOptions) -> Result<Self> {
        problem.validate()?;
        if n_paths == 0 {
            return invalid("need at least one path");
        }
        if options.refine == 0 {
            return invalid("refinement factor must be at least 1");
        }
        let d = problem.dim;
        let recs: Vec<Record> =
            (0..n_paths).into_par_iter().map(|i| simulate_one(&problem, &grid, &options, seed, i)).collect();
        let mut exits = Vec::with_capacity(n_paths);
        let mut xi_states = Vec::with_capacity(n_paths * d);
        let mut fine_exits = Vec::with_capacity(n_paths);
        let mut fine_states = Vec::new();
        let mut faults = Vec::with_capacity(n_paths);
        let mut lasts = Vec::with_capacity(n_paths);
        for r in &recs {
            lasts.push(r.last);
            exits.push(r.exit);
            xi_states.extend_from_slice(&r.xi);
            fine_exits.push(r.fine_exit);
            fine_states.extend_from_slice(&r.fine_state);
            faults.push(r.fault);
        }
        let store = (options.storage == Storage::Nodes).then(|| build_store(&recs, d));
        Ok(Self { problem, grid, seed, n_paths, options, exits, xi_states, fine_exits, fine_states, faults, lasts, store })
    }

    pub fn last_node(&self, i: usize) -> usize {
        self.lasts[i] as usize
    }

    pub fn xi_state(&self, i: usize) -> &[f64] {
        let d = self.problem.dim;
        &self.xi_states[i * d..(i + 1) * d]
    }

    pub fn fine_state(&self, i: usize) -> &[f64] {
        let d = self.problem.dim;
        &self.fine_states[i * d..(i + 1) * d]
    }

    /// `g` at the truncated exit state.
    pub fn xi(&self, i: usize) -> f64 {
        (self.problem.boundary)(self.xi_state(i))
    }

    pub fn is_coupled(&self) -> bool {
        self.options.refine > 1
    }

    pub fn fault_count(&self) -> usize {
        self.faults.iter().filter(|f| **f).count()
    }

    /// Fresh stepper reproducing path `i` from the start.
    pub fn replay(&self, i: usize) -> Stepper<'_> {
        Stepper::new(
            &self.problem,
            self.grid.h,
            self.options.refine,
            self.seed,
            i as u64,
            self.options.noise,
            self.options.reference_exit,
        )
    }
}

fn build_store(recs: &[Record], d: usize) -> NodeStore {
    let n = recs.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|a, b| recs[*b as usize].last.cmp(&recs[*a as usize].last).then(a.cmp(b)));
    let mut rank = vec![0u32; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i as usize] = r as u32;
    }
    let max_last = recs[order[0] as usize].last as usize;
    let mut counts = vec![0usize; max_last + 1];
    for r in recs {
        counts[r.last as usize] += 1;
    }
    for k in (0..max_last).rev() {
        counts[k] += counts[k + 1];
    }
    let mut offsets = vec![0usize; max_last + 2];
    for k in 0..=max_last {
        offsets[k + 1] = offsets[k] + counts[k];
    }
    let total = offsets[max_last + 1];
    let mut x = vec![0.0; total * d];
    let mut w = vec![0.0; total * d];
    for (r, &i) in order.iter().enumerate() {
        let rec = &recs[i as usize];
        for k in 0..=rec.last as usize {
            let o = (offsets[k] + r) * d;
            x[o..o + d].copy_from_slice(&rec.x[k * d..(k + 1) * d]);
            w[o..o + d].copy_from_slice(&rec.w[k * d..(k + 1) * d]);
        }
    }
    offsets.pop();
    NodeStore { d, order, rank, counts, offsets, x, w }
}

/// Coarse paths only.
pub fn simulate_paths(
    problem: Arc<ProblemSpec>,
    grid: GridSpec,
    n_paths: usize,
    seed: u64,
    storage: Storage,
) -> Result<PathBundle> {
    PathBundle::simulate(problem, grid, n_paths, seed, SimOptions { storage, ..SimOptions::default() })
}

/// Coarse paths with a fine reference chain of `refine` sub-steps.
pub fn coupled_fine_reference(
    problem: Arc<ProblemSpec>,
    grid: GridSpec,
    refine: usize,
    n_paths: usize,
    seed: u64,
    storage: Storage,
) -> Result<PathBundle> {
    if refine < 2 {
        return invalid("a fine reference needs refine >= 2");
    }
    PathBundle::simulate(problem, grid, n_paths, seed, SimOptions { refine, storage, ..SimOptions::default() })
}
