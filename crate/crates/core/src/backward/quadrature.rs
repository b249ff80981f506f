use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

/// Gauss–Hermite rule for the standard normal law: `E[f(Z)] ≈ Σ w_k f(z_k)`.
///
/// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite
/// polynomials. Weights sum to one.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || order > 200 {
        return invalid(format!("quadrature order {order} out of range 1..=200"));
    }
    let mut j = DMatrix::<f64>::zeros(order, order);
    for i in 1..order {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize away the eigen-solver's last-bit asymmetry.
    let n = pairs.len();
    for k in 0..n / 2 {
        let z = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
        let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
        pairs[k] = (-z, w);
        pairs[n - 1 - k] = (z, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok((pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect()))
}

/// Tensor-product rule in `d` dimensions, nodes row-major.
pub fn tensor_rule(order: usize, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (z, w) = gauss_hermite(order)?;
    let count = order.checked_pow(d as u32).filter(|c| *c <= 1 << 20);
    let Some(count) = count else {
        return invalid(format!("tensor rule of order {order} in dimension {d} is too large"));
    };
    let mut nodes = Vec::with_capacity(count * d);
    let mut weights = Vec::with_capacity(count);
    for flat in 0..count {
        let mut rem = flat;
        let mut wt = 1.0;
        for _ in 0..d {
            let k = rem % order;
            rem /= order;
            nodes.push(z[k]);
            wt *= w[k];
        }
        weights.push(wt);
    }
    Ok((nodes, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_moments() {
        let (z, w) = gauss_hermite(16).unwrap();
        let m = |p: i32| z.iter().zip(&w).map(|(z, w)| w * z.powi(p)).sum::<f64>();
        assert_relative_eq!(m(0), 1.0, epsilon = 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert_relative_eq!(m(2), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m(4), 3.0, epsilon = 1e-12);
        assert_relative_eq!(m(8), 105.0, epsilon = 1e-9);
    }

    #[test]
    fn three_point_rule() {
        let (z, w) = gauss_hermite(3).unwrap();
        assert_relative_eq!(z[2], 3f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(w[1], 2.0 / 3.0, epsilon = 1e-13);
        assert_relative_eq!(w[0], 1.0 / 6.0, epsilon = 1e-13);
    }

    #[test]
    fn tensor_second_moments() {
        let (n, w) = tensor_rule(5, 2).unwrap();
        let exy: f64 = w.iter().enumerate().map(|(k, w)| w * n[2 * k] * n[2 * k + 1]).sum();
        let ex2: f64 = w.iter().enumerate().map(|(k, w)| w * n[2 * k].powi(2)).sum();
        assert!(exy.abs() < 1e-14);
        assert_relative_eq!(ex2, 1.0, epsilon = 1e-12);
    }
}
