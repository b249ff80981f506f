use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicitSolve {
    pub y: f64,
    pub iterations: usize,
}

/// Iteration bound `ceil(log(tol / |h f(x, q)|) / log(h L_f)) + 1`.
pub fn iteration_bound(first_step: f64, h: f64, l_f: f64, tol: f64) -> usize {
    if first_step <= tol {
        return 1;
    }
    let k = (tol / first_step).ln() / (h * l_f).ln();
    k.ceil().max(0.0) as usize + 1
}

/// Solves `y = q + h f(x, y)` by fixed-point iteration from `y = q`,
/// stopping at the first iterate whose residual is at most `tol`.
pub fn implicit_node_solve(q: f64, x: &[f64], f: &dyn Fn(&[f64], f64) -> f64, h: f64, l_f: f64, tol: f64) -> Result<ImplicitSolve> {
    if !(h > 0.0) || !(l_f > 0.0) || !(tol > 0.0) {
        return invalid(format!("implicit step needs h, L_f, tol > 0 (h={h}, L_f={l_f}, tol={tol})"));
    }
    if !(h * l_f < 1.0) {
        return invalid(format!("h L_f = {} must be below 1", h * l_f));
    }
    let mut y = q;
    let mut next = q + h * f(x, y);
    let bound = iteration_bound((next - y).abs(), h, l_f, tol);
    let mut iterations = 0;
    loop {
        if !next.is_finite() {
            return Err(Error::Numerical(format!("implicit iterate diverged at x={x:?}")));
        }
        if (next - y).abs() <= tol {
            return Ok(ImplicitSolve { y, iterations });
        }
        if iterations >= bound {
            return Err(Error::NonConvergence(format!(
                "implicit step exceeded {bound} iterations at x={x:?}; is L_f declared too small?"
            )));
        }
        y = next;
        iterations += 1;
        next = q + h * f(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_generator_is_one_step() {
        let s = implicit_node_solve(0.4, &[0.0], &|_, _| 0.1, 0.05, 0.01, 1e-10).unwrap();
        assert_eq!(s.iterations, 1);
        assert!((s.y - 0.405).abs() < 1e-15);
    }

    #[test]
    fn sine_within_bound() {
        let s = implicit_node_solve(1.0, &[0.0], &|_, y: f64| y.sin(), 0.05, 1.0, 1e-12).unwrap();
        assert!(s.iterations <= 11, "{}", s.iterations);
        assert!((s.y - (1.0 + 0.05 * s.y.sin())).abs() <= 1e-12);
    }

    #[test]
    fn linear_decay_has_closed_form() {
        let s = implicit_node_solve(2.0, &[0.0], &|_, y| -y, 0.1, 1.0, 1e-13).unwrap();
        assert!((s.y - 2.0 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn understated_constant_is_reported() {
        let r = implicit_node_solve(1.0, &[0.0], &|_, y| 9.0 * y, 0.1, 0.01, 1e-12);
        assert!(r.is_err());
    }
}
