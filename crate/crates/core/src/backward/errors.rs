use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DiscreteSolution;
use crate::error::{invalid, Result};
use crate::forward::PathBundle;
use crate::problem::ScalarFn;
use crate::stats::{Accumulator, MeanCi};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    /// `sup_l E[sup_{t in [l, l+h]} |Y_t - Y_hat_l|^2]`, CI taken at the
    /// maximizing node.
    pub e1: MeanCi,
    pub e1_node: usize,
    /// `E[sup_l sup_{t in [l, l+h]} |Y_t - Y_hat_l|^2]`.
    pub e2: MeanCi,
    /// `E|g(X_tau_ref) - g(X_bar_tau_bar)|^2` over uncensored paths.
    pub terminal: MeanCi,
    /// Per-node window error `E[sup_{t in [l, l+h]} |Y_t - Y_hat_l|^2]`.
    pub per_node: Vec<MeanCi>,
    pub n_paths: usize,
    pub censored: usize,
}

struct PathErrors {
    windows: Vec<f64>,
    tail: f64,
    sup: f64,
    terminal: Option<f64>,
}

/// Error functionals of a discrete solution against the reference
/// `Y_t = u(X^fine_{t ∧ tau_ref})`, with the windows sampled at the fine
/// sub-steps and at the reference exit time.
pub fn error_functionals(sol: &dyn DiscreteSolution, b: &PathBundle, u: &ScalarFn) -> Result<ErrorReport> {
    if !b.is_coupled() {
        return invalid("error functionals need a bundle with a fine reference");
    }
    let g = &b.problem.boundary;
    let n_max = b.grid.nodes();
    let per_path: Vec<PathErrors> = (0..b.n_paths)
        .into_par_iter()
        .map(|i| {
            let last = b.last_node(i);
            let xi = b.xi(i);
            let mut st = b.replay(i);
            let mut y_cur = u(&st.fine);
            let mut frozen = false;
            let mut windows = Vec::new();
            let mut sup: f64 = 0.0;
            loop {
                let n = st.node;
                if n >= last && frozen {
                    break;
                }
                if n >= n_max {
                    break;
                }
                let yhat = if n < last { sol.value(i, n, &st.coarse) } else { xi };
                let mut w = (y_cur - yhat).powi(2);
                st.step_with(|v| {
                    if frozen {
                        return;
                    }
                    y_cur = match v.exit {
                        Some((_, xe)) => {
                            frozen = true;
                            u(xe)
                        }
                        None => u(v.fine),
                    };
                    w = w.max((y_cur - yhat).powi(2));
                });
                windows.push(w);
                sup = sup.max(w);
            }
            let tail = (y_cur - xi).powi(2);
            sup = sup.max(tail);
            let terminal = match (b.exits[i], b.fine_exits[i]) {
                (Some(_), Some(_)) if !b.faults[i] => Some(((g)(b.fine_state(i)) - xi).powi(2)),
                _ => None,
            };
            PathErrors { windows, tail, sup, terminal }
        })
        .collect();
    let span = per_path.iter().map(|p| p.windows.len()).max().unwrap_or(0) + 1;
    let mut per_node = Vec::with_capacity(span);
    for n in 0..span {
        let mut acc = Accumulator::default();
        for p in &per_path {
            acc.push(p.windows.get(n).copied().unwrap_or(p.tail));
        }
        per_node.push(acc.finish());
    }
    let (e1_node, e1) = per_node
        .iter()
        .enumerate()
        .fold((0, per_node[0]), |best, (n, m)| if m.mean > best.1.mean { (n, *m) } else { best });
    let mut sup_acc = Accumulator::default();
    let mut term_acc = Accumulator::default();
    for p in &per_path {
        sup_acc.push(p.sup);
        if let Some(t) = p.terminal {
            term_acc.push(t);
        }
    }
    Ok(ErrorReport {
        h: b.grid.h,
        e1,
        e1_node,
        e2: sup_acc.finish(),
        terminal: term_acc.finish(),
        per_node,
        n_paths: b.n_paths,
        censored: b.n_paths - term_acc.count(),
    })
}
