use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Open domain D. Membership tests are strict: boundary points are outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { lo: f64, hi: f64 },
    Cube { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Interval { lo, hi }
    }

    /// The sup-norm ball `(-r, r)^d`.
    pub fn sup_ball(d: usize, r: f64) -> Self {
        if d == 1 {
            return Domain::Interval { lo: -r, hi: r };
        }
        Domain::Cube { lo: vec![-r; d], hi: vec![r; d] }
    }

    pub fn ball(d: usize, r: f64) -> Self {
        Domain::Ball { center: vec![0.0; d], radius: r }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Interval { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Domain::Cube { lo, hi } => {
                !lo.is_empty()
                    && lo.len() == hi.len()
                    && lo.iter().zip(hi).all(|(a, b)| a.is_finite() && b.is_finite() && a < b)
            }
            Domain::Ball { center, radius } => {
                !center.is_empty() && center.iter().all(|c| c.is_finite()) && *radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("degenerate or unbounded domain {self:?}"))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Cube { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { lo, hi } => x[0] > *lo && x[0] < *hi,
            Domain::Cube { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v > a && v < b),
            Domain::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum();
                r2 < radius * radius
            }
        }
    }

    /// Axis-aligned bounding box of the closure.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Domain::Cube { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Largest half-width of the bounding box.
    pub fn half_width(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max)
    }

    /// Distance to the boundary for interior points, negative outside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            Domain::Cube { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>().sqrt();
                radius - r
            }
        }
    }

    /// Probability that a Brownian bridge from `x` to `y` over time `dt`
    /// touched the boundary, with the local noise `sigma` (row-major d×d)
    /// frozen at `x`. Faces are treated as independent half-spaces.
    pub fn bridge_crossing_probability(&self, x: &[f64], y: &[f64], sigma: &[f64], dt: f64) -> f64 {
        let d = x.len();
        let half_space = |a: f64, b: f64, s2: f64| -> f64 {
            if s2 <= 0.0 {
                return 0.0;
            }
            let e = 2.0 * a * b / (s2 * dt);
            if e > 40.0 {
                0.0
            } else {
                (-e).exp()
            }
        };
        match self {
            Domain::Interval { lo, hi } => {
                let s2 = sigma[0] * sigma[0];
                let p1 = half_space(x[0] - lo, y[0] - lo, s2);
                let p2 = half_space(hi - x[0], hi - y[0], s2);
                1.0 - (1.0 - p1) * (1.0 - p2)
            }
            Domain::Cube { lo, hi } => {
                let mut stay = 1.0;
                for i in 0..d {
                    let s2: f64 = (0..d).map(|j| sigma[i * d + j].powi(2)).sum();
                    let p1 = half_space(x[i] - lo[i], y[i] - lo[i], s2);
                    let p2 = half_space(hi[i] - x[i], hi[i] - y[i], s2);
                    stay *= (1.0 - p1) * (1.0 - p2);
                }
                1.0 - stay
            }
            Domain::Ball { center, radius } => {
                let rx: f64 = x.iter().zip(center).map(|(v, c)| (v - c).powi(2)).sum::<f64>().sqrt();
                let ry: f64 = y.iter().zip(center).map(|(v, c)| (v - c).powi(2)).sum::<f64>().sqrt();
                if rx == 0.0 {
                    return 0.0;
                }
                let mut s2 = 0.0;
                for j in 0..d {
                    let mut col = 0.0;
                    for i in 0..d {
                        col += (x[i] - center[i]) / rx * sigma[i * d + j];
                    }
                    s2 += col * col;
                }
                half_space(radius - rx, radius - ry, s2)
            }
        }
    }

    /// Fraction `θ ∈ [0, 1]` along the segment from interior `x` to exterior
    /// `y` where the segment meets the boundary.
    pub fn segment_exit_fraction(&self, x: &[f64], y: &[f64]) -> f64 {
        let theta = match self {
            Domain::Interval { lo, hi } => {
                if y[0] <= *lo {
                    (x[0] - lo) / (x[0] - y[0])
                } else {
                    (hi - x[0]) / (y[0] - x[0])
                }
            }
            Domain::Cube { lo, hi } => {
                let mut t = 1.0f64;
                for i in 0..x.len() {
                    if y[i] <= lo[i] {
                        t = t.min((x[i] - lo[i]) / (x[i] - y[i]));
                    }
                    if y[i] >= hi[i] {
                        t = t.min((hi[i] - x[i]) / (y[i] - x[i]));
                    }
                }
                t
            }
            Domain::Ball { center, radius } => {
                // |p + t v|^2 = r^2 with p = x - c, v = y - x.
                let (mut pv, mut vv, mut pp) = (0.0, 0.0, 0.0);
                for i in 0..x.len() {
                    let p = x[i] - center[i];
                    let v = y[i] - x[i];
                    pv += p * v;
                    vv += v * v;
                    pp += p * p;
                }
                if vv == 0.0 {
                    1.0
                } else {
                    let disc = (pv * pv - vv * (pp - radius * radius)).max(0.0);
                    (-pv + disc.sqrt()) / vv
                }
            }
        };
        if theta.is_finite() {
            theta.clamp(0.0, 1.0)
        } else {
            1.0
        }
    }

    /// Nearest boundary point to an interior `x`.
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        match self {
            Domain::Interval { lo, hi } => {
                out[0] = if x[0] - lo < hi - x[0] { *lo } else { *hi };
            }
            Domain::Cube { lo, hi } => {
                let mut best = (f64::INFINITY, 0, 0.0);
                for i in 0..x.len() {
                    if x[i] - lo[i] < best.0 {
                        best = (x[i] - lo[i], i, lo[i]);
                    }
                    if hi[i] - x[i] < best.0 {
                        best = (hi[i] - x[i], i, hi[i]);
                    }
                }
                out[best.1] = best.2;
            }
            Domain::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(v, c)| (v - c).powi(2)).sum::<f64>().sqrt();
                if r == 0.0 {
                    out[0] = center[0] + radius;
                } else {
                    for i in 0..x.len() {
                        out[i] = center[i] + (x[i] - center[i]) * radius / r;
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_points_are_outside() {
        let d = Domain::interval(-1.0, 1.0);
        assert!(!d.contains(&[1.0]));
        assert!(!d.contains(&[-1.0]));
        assert!(d.contains(&[0.999]));
        let b = Domain::ball(2, 1.0);
        assert!(!b.contains(&[1.0, 0.0]));
        assert!(b.contains(&[0.6, 0.6]));
    }

    #[test]
    fn degenerate_domains_rejected() {
        assert!(Domain::interval(1.0, 1.0).validate().is_err());
        assert!(Domain::ball(2, 0.0).validate().is_err());
        assert!(Domain::interval(f64::NEG_INFINITY, 0.0).validate().is_err());
    }

    #[test]
    fn exit_fraction_hits_boundary() {
        let b = Domain::ball(2, 1.0);
        let t = b.segment_exit_fraction(&[0.0, 0.0], &[2.0, 0.0]);
        assert!((t - 0.5).abs() < 1e-12);
        let i = Domain::interval(-1.0, 1.0);
        assert!((i.segment_exit_fraction(&[0.5], &[1.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn crossing_probability_half_space_formula() {
        let i = Domain::interval(-10.0, 1.0);
        let p = i.bridge_crossing_probability(&[0.9], &[0.8], &[1.0], 0.01);
        assert!((p - (-2.0f64 * 0.1 * 0.2 / 0.01).exp()).abs() < 1e-12);
    }
}
